import math

import numpy as np
import pytest

from oracles import bcs_coherent_cell

from latticemf.draws import random_even_localop, random_ti_interaction
from latticemf.errors import GeometryError
from latticemf.fock import (
    LocalOp,
    ModeSpace,
    SPIN_HALF,
    SPINLESS,
    annihilator_local,
    number_local,
)
from latticemf.interactions import hopping_nn
from latticemf.lattice import Box, PeriodVector
from latticemf.states import (
    Mixture,
    ProductStateSpec,
    coarse_grain,
    ergodicity_defect,
    product_state,
    space_average,
)


@pytest.fixture
def spin_space():
    return ModeSpace(Box(1, 1), SPIN_HALF)


def test_vacuum_product(spin_space):
    vac = np.zeros((4, 4), dtype=complex)
    vac[0, 0] = 1.0
    st = product_state(vac, spin_space, PeriodVector((1,)))
    assert st.is_pure
    for site in spin_space.box.sites:
        for s in SPIN_HALF:
            assert abs(st.expectation(spin_space.number_op(site, s))) < 1e-12


def test_maximally_mixed_cell(spin_space):
    st = product_state(np.eye(4) / 4, spin_space, PeriodVector((1,)))
    assert not st.is_pure
    traceless = number_local((0,), SPIN_HALF, "up") + (-0.5) * LocalOp(
        ((0,),), SPIN_HALF, np.eye(4)
    )
    assert abs(st.expectation(spin_space.embed(traceless))) < 1e-12


def test_bcs_coherent_pairing_expectation(spin_space):
    theta = 0.61
    st = product_state(bcs_coherent_cell(theta), spin_space, PeriodVector((1,)))
    pair = annihilator_local((0,), SPIN_HALF, "down") @ annihilator_local(
        (0,), SPIN_HALF, "up"
    )
    for x in (-1, 0, 1):
        val = st.expectation(spin_space.embed(pair.translate((x,))))
        assert abs(val - math.sin(theta) * math.cos(theta)) < 1e-12


def test_product_factorization(spin_space):
    st = product_state(bcs_coherent_cell(0.7), spin_space, PeriodVector((1,)))
    n0 = number_local((0,), SPIN_HALF, "up")
    n1 = number_local((1,), SPIN_HALF, "up")
    lhs = st.expectation(spin_space.embed(n0 @ n1))
    rhs = st.expectation(spin_space.embed(n0)) * st.expectation(spin_space.embed(n1))
    assert abs(lhs - rhs) < 1e-12


def test_density_and_vector_paths_agree(spin_space):
    cell = bcs_coherent_cell(0.5, phase=0.3)
    st_v = product_state(cell, spin_space, PeriodVector((1,)))
    st_d = product_state(cell, spin_space, PeriodVector((1,)), force_density=True)
    assert st_v.is_pure and not st_d.is_pure
    pair = annihilator_local((0,), SPIN_HALF, "down") @ annihilator_local(
        (0,), SPIN_HALF, "up"
    )
    ops = [pair, number_local((0,), SPIN_HALF, "down"),
           number_local((-1,), SPIN_HALF, "up") @ number_local((1,), SPIN_HALF, "up")]
    for op in ops:
        assert abs(st_v.expectation(spin_space.embed(op))
                   - st_d.expectation(spin_space.embed(op))) < 1e-9


def test_expectation_basics(spin_space):
    st = product_state(bcs_coherent_cell(0.4), spin_space, PeriodVector((1,)))
    assert abs(st.expectation(spin_space.identity()) - 1.0) < 1e-12
    n = spin_space.number_op((0,), "up")
    assert abs(st.expectation(n).imag) < 1e-12
    a = spin_space.annihilator((0,), "up")
    assert abs(st.expectation(a.dagger()) - np.conj(st.expectation(a))) < 1e-12


def test_periodic_states_kill_odd_operators(spin_space, rng):
    st = product_state(bcs_coherent_cell(0.8), spin_space, PeriodVector((1,)))
    # random odd monomials have zero expectation in even states
    for _ in range(5):
        op = random_even_localop(rng, ((0,),), SPIN_HALF)
        odd = annihilator_local((0,), SPIN_HALF, "up") @ op
        if odd.parity(1e-10) == "odd":
            assert abs(st.expectation(spin_space.embed(odd))) < 1e-10


def test_non_even_cell_rejected(spin_space):
    v = np.zeros(4, dtype=complex)
    v[0] = v[1] = 1 / math.sqrt(2)  # mixes parity sectors
    with pytest.raises(ValueError):
        product_state(v, spin_space, PeriodVector((1,)))


def test_nonperiodic_density_rejected():
    space = ModeSpace(Box(1, 1), SPINLESS)
    rho = np.zeros((8, 8), dtype=complex)
    rho[1, 1] = 1.0  # single fermion on site -1: not 1-periodic
    from latticemf.states import LatticeState

    with pytest.raises(ValueError):
        LatticeState(space, PeriodVector((1,)), density=rho)


def test_alternating_two_periodic():
    space = ModeSpace(Box(1, 2), SPINLESS)
    cell = np.zeros(4, dtype=complex)
    cell[1] = 1.0  # first cell mode occupied
    st = product_state(cell, space, PeriodVector((2,)))
    for x in range(-2, 3):
        want = 1.0 if x % 2 == 0 else 0.0
        assert abs(st.expectation(space.number_op((x,), "s")) - want) < 1e-12


def test_space_average_examples(rng):
    space = ModeSpace(Box(1, 2), SPINLESS)
    one = space.identity()
    avg = space_average(one.local_form, space, PeriodVector((1,)))
    assert np.abs((avg.mat - one.mat).toarray()).max() < 1e-12
    a = random_even_localop(rng, ((0,),), SPINLESS)
    a_l = space_average(a, space, PeriodVector((1,)))
    assert a_l.norm() <= a.norm() + 1e-12
    # averaging an already averaged op is idempotent up to boundary terms:
    # exact when the observable is a single site and all translates fit
    em = space.embed(a)
    avg2 = space_average(a_l, space, PeriodVector((1,)))
    # avg2 has no local form beyond cap; instead compare expectation on a state
    cell = np.array([[0.3, 0], [0, 0.7]], dtype=complex)
    st = product_state(cell, space, PeriodVector((1,)))
    assert abs(st.expectation(a_l) - st.expectation(em)) < 1e-12


def test_ergodicity_defect_examples(rng):
    space = ModeSpace(Box(1, 3), SPINLESS)
    one = space.identity()
    cell = np.array([[0.3, 0], [0, 0.7]], dtype=complex)
    st = product_state(cell, space, PeriodVector((1,)))
    assert abs(ergodicity_defect(st, one.local_form)) < 1e-12
    a = number_local((0,), SPINLESS, "s")
    d = ergodicity_defect(st, a)
    var = (st.expectation(space.embed(a @ a)) - st.expectation(space.embed(a)) ** 2).real
    assert d >= -1e-10
    assert abs(d - var / 7.0) < 1e-12  # covariance-count oracle: Var/n_translates


def test_ergodicity_defect_decays_with_L():
    cell = np.array([[0.3, 0], [0, 0.7]], dtype=complex)
    a = number_local((0,), SPINLESS, "s")
    defects = []
    for L in (1, 2, 3, 4):
        space = ModeSpace(Box(1, L), SPINLESS)
        st = product_state(cell, space, PeriodVector((1,)))
        defects.append(ergodicity_defect(st, a))
    assert all(defects[i] > defects[i + 1] for i in range(len(defects) - 1))


def test_mixture_defect_lower_bound():
    space = ModeSpace(Box(1, 3), SPINLESS)
    ell = PeriodVector((1,))
    empty = ProductStateSpec(np.diag([1.0, 0.0]).astype(complex), ell, SPINLESS)
    full = ProductStateSpec(np.diag([0.0, 1.0]).astype(complex), ell, SPINLESS)
    lam = 0.3
    mix = Mixture([lam, 1 - lam], [empty, full])
    a = number_local((0,), SPINLESS, "s")
    a_l = space_average(a, space, ell)
    pairs = mix.realize(space)
    val = sum(w * s.expectation(a_l.dagger() @ a_l) for w, s in pairs)
    mean = sum(w * s.expectation(space.embed(a)) for w, s in pairs)
    defect = (val - abs(mean) ** 2).real
    assert defect >= lam * (1 - lam) * 1.0 - 1e-12


def test_mixture_degenerate_flag():
    ell = PeriodVector((1,))
    spec = ProductStateSpec(np.diag([1.0, 0.0]).astype(complex), ell, SPINLESS)
    mix = Mixture([0.4, 0.6], [spec, spec])
    assert mix.degenerate


def test_coarse_grain_identity():
    space = ModeSpace(Box(1, 2), SPINLESS)
    cell = np.array([[0.2, 0], [0, 0.8]], dtype=complex)
    st = product_state(cell, space, PeriodVector((1,)))
    assert coarse_grain(st, PeriodVector((1,)), PeriodVector((1,))) is st


def test_coarse_grain_divisibility():
    space = ModeSpace(Box(1, 2), SPINLESS)
    cell = np.array([[0.2, 0], [0, 0.8]], dtype=complex)
    st = product_state(cell, space, PeriodVector((1,)))
    with pytest.raises(GeometryError):
        coarse_grain(st, PeriodVector((1,)), PeriodVector((2,)))


def test_coarse_grain_alternating_to_uniform():
    space = ModeSpace(Box(1, 2), SPINLESS)
    cell = np.zeros(4, dtype=complex)
    cell[1] = 1.0
    st = product_state(cell, space, PeriodVector((2,)))
    cg = coarse_grain(st, PeriodVector((2,)), PeriodVector((1,)))
    n0 = number_local((0,), SPINLESS, "s")
    assert abs(cg.expectation(n0) - 0.5) < 1e-12
    cg.check_periodicity()


def test_coarse_grain_energy_density_consistency(rng):
    # Lemma (ii): rho(e_{Phi,ell1}) = x(rho)(e_{Phi,ell2}) with coherences
    space = ModeSpace(Box(1, 3), SPINLESS)
    ell1, ell2 = PeriodVector((2,)), PeriodVector((1,))
    v = np.zeros(4, dtype=complex)
    v[1] = v[2] = 1 / math.sqrt(2)  # (|01> + |10>)/sqrt2: odd-parity pure cell
    st = product_state(v, space, ell1)
    cg = coarse_grain(st, ell1, ell2)
    for _ in range(5):
        phi = random_ti_interaction(rng, SPINLESS, max_extent=1, max_sites=2)
        e1 = phi.energy_density(ell1)
        e2 = phi.energy_density(ell2)
        lhs = st.expectation(space.embed(e1.operator))
        rhs = cg.expectation(e2.operator)
        assert abs(lhs - rhs) < 1e-9
        assert abs(lhs) > 0 or True
    # make sure the probe is not trivially zero for at least hopping
    hop = hopping_nn(SPINLESS, 1.0, 1)
    lhs = st.expectation(space.embed(hop.energy_density(ell1).operator))
    assert abs(lhs) > 1e-3
