import numpy as np
import pytest

from latticemf.draws import random_model, random_ti_interaction
from latticemf.fock import ModeSpace, SPIN_HALF, SPINLESS
from latticemf.hamiltonians import (
    assemble_model_hamiltonian,
    local_energy,
    local_energy_model,
)
from latticemf.interactions import (
    LongRangeModel,
    Schedule,
    TimeDependentModel,
    build_bcs_model,
    constant_model,
    number_onsite,
    zero_interaction,
)
from latticemf.lattice import Box, DecayFunction, PeriodVector
from latticemf.states import product_state


@pytest.fixture
def F():
    return DecayFunction("exponential", kappa=1.0)


def test_local_energy_onsite_number():
    space = ModeSpace(Box(1, 1), SPINLESS)
    phi = number_onsite(SPINLESS, 1.0)
    u = local_energy(phi, space)
    direct = sum(
        (space.number_op((x,), "s").mat for x in (-1, 0, 1)),
        start=0 * space.identity().mat,
    )
    assert np.abs((u.mat - direct).toarray()).max() < 1e-14
    assert abs(u.norm() - 3.0) < 1e-10


def test_local_energy_zero():
    space = ModeSpace(Box(1, 1), SPINLESS)
    u = local_energy(zero_interaction(SPINLESS), space)
    assert u.mat.nnz == 0


def test_norm_uphi_bound(F, rng):
    # ||U_L^Phi|| <= |Lambda_L| * normF1 * ||Phi||_W
    space = ModeSpace(Box(1, 2), SPINLESS)
    n1, _ = F.constants(space.box)
    for _ in range(10):
        phi = random_ti_interaction(rng, SPINLESS)
        u = local_energy(phi, space)
        bound = len(space.box) * n1 * phi.w_norm(F, space.box)
        assert u.norm() <= bound + 1e-8


def test_model_short_range_reduction(rng, F):
    space = ModeSpace(Box(1, 1), SPINLESS)
    phi = random_ti_interaction(rng, SPINLESS)
    phi = 0.5 * (phi + phi.involution())
    m = LongRangeModel(phi, ())
    assert np.abs(
        (local_energy_model(m, space).mat - local_energy(phi, space).mat).toarray()
    ).max() < 1e-12


def test_bcs_one_site_oracle():
    gamma, mu = 0.8, 0.3
    space = ModeSpace(Box(1, 0), SPIN_HALF)
    u = local_energy_model(build_bcs_model(gamma, mu), space).mat.toarray()
    oracle = np.diag([0.0, -mu, -mu, -2 * mu - gamma]).astype(complex)
    assert np.abs(u - oracle).max() < 1e-12


def test_bcs_three_site_brute_force():
    gamma, mu = 0.8, 0.3
    space = ModeSpace(Box(1, 1), SPIN_HALF)
    u = local_energy_model(build_bcs_model(gamma, mu), space).mat.toarray()
    brute = np.zeros_like(u)
    for site in space.box.sites:
        for s in SPIN_HALF:
            brute += -mu * (space.creator(site, s) @ space.annihilator(site, s)).mat.toarray()
    for x in space.box.sites:
        for y in space.box.sites:
            term = (
                space.creator(x, "up")
                @ space.creator(x, "down")
                @ space.annihilator(y, "down")
                @ space.annihilator(y, "up")
            ).mat.toarray()
            brute += -(gamma / 3.0) * term
    assert np.abs(u - brute).max() < 1e-12


def test_energy_bound_long_range(F, rng):
    # ||U_L^m|| <= |Lambda_L| * normF1 * ||m||_M on random models
    space = ModeSpace(Box(1, 2), SPINLESS)
    n1, _ = F.constants(space.box)
    for _ in range(8):
        m = random_model(rng, SPINLESS, F, space.box)
        u = local_energy_model(m, space)
        bound = len(space.box) * n1 * m.m_norm(F, space.box)
        assert u.norm() <= bound + 1e-8
        assert u.is_hermitian(1e-10)


def test_onsite_density_expectation_exact():
    # finite-box version of the density limit: for on-site TI Phi,
    # rho(U_L^Phi)/|Lambda_L| equals the single-site expectation exactly
    space = ModeSpace(Box(1, 2), SPINLESS)
    phi = number_onsite(SPINLESS, 1.0)
    cell = np.array([[0.4, 0.0], [0.0, 0.6]], dtype=complex)
    state = product_state(cell, space, PeriodVector((1,)))
    u = local_energy(phi, space)
    per_site = state.expectation(u) / len(space.box)
    single = state.expectation(space.embed(phi.terms[0]))
    assert abs(per_site - single) < 1e-12


def test_time_dependent_assembly_matches_direct(F):
    space = ModeSpace(Box(1, 1), SPIN_HALF)
    m = build_bcs_model(0.9, 0.4)
    td = TimeDependentModel(
        m,
        phi_schedule=Schedule("ramp", value=1.0, slope=0.5),
        atom_schedules=(Schedule("sine", value=1.0, amplitude=0.3, omega=2.0),),
    )
    ham = assemble_model_hamiltonian(td, space)
    for t in (0.0, 0.37, 1.5):
        direct = local_energy_model(td.at(t), space).mat.toarray()
        assert np.abs(ham.matrix(t).toarray() - direct).max() < 1e-12
    assert not ham.is_constant
    assert assemble_model_hamiltonian(constant_model(m), space).is_constant


def test_combination_fused_eval(F):
    space = ModeSpace(Box(1, 0), SPIN_HALF)
    td = TimeDependentModel(
        build_bcs_model(1.0, 0.5),
        atom_schedules=(Schedule("ramp", value=1.0, slope=-0.1),),
    )
    ham = assemble_model_hamiltonian(td, space)
    got = ham.combination([(0.3, 0.1), (-1.2j, 0.9)]).toarray()
    want = 0.3 * ham.matrix(0.1).toarray() - 1.2j * ham.matrix(0.9).toarray()
    assert np.abs(got - want).max() < 1e-12
