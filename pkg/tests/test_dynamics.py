import numpy as np
import pytest

from oracles import heisenberg_eig

from latticemf.draws import random_local_observable
from latticemf.dynamics import (
    TimeGrid,
    cocycle_defect,
    default_steps,
    derivation,
    heisenberg,
    propagate,
    propagate_vector,
)
from latticemf.fock import ModeSpace, SPIN_HALF, SPINLESS, creator_local
from latticemf.hamiltonians import assemble_model_hamiltonian, local_energy_model
from latticemf.interactions import (
    Atom,
    Interaction,
    LongRangeModel,
    Schedule,
    TimeDependentModel,
    build_bcs_model,
    constant_model,
    hopping_nn,
    number_onsite,
)
from latticemf.lattice import Box


def noncommuting_model():
    """Spinless chain with hopping plus a sine-scheduled p-wave pairing term."""
    pc = creator_local((0,), SPINLESS, "s") @ creator_local((1,), SPINLESS, "s")
    pair_int = Interaction((pc + pc.dagger(),), True, SPINLESS)
    m = LongRangeModel(
        hopping_nn(SPINLESS, 1.0, 1) + number_onsite(SPINLESS, -0.5, 1),
        (Atom(1.0, (pair_int,)),),
    )
    return TimeDependentModel(
        m, atom_schedules=(Schedule("sine", value=0.4, amplitude=0.7, omega=2.5),)
    )


@pytest.fixture(scope="module")
def chain():
    space = ModeSpace(Box(1, 1), SPINLESS)
    return space, assemble_model_hamiltonian(noncommuting_model(), space)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)
    g = TimeGrid(0.0, 1.0, 4)
    assert np.allclose(g.nodes(), [0, 0.25, 0.5, 0.75, 1.0])


def test_zero_model_identity():
    space = ModeSpace(Box(1, 1), SPINLESS)
    ham = assemble_model_hamiltonian(
        constant_model(LongRangeModel(number_onsite(SPINLESS, 0.0), ())), space
    )
    p = propagate(ham, space, 0.0, 1.0, steps=16, method="cf4")
    assert np.abs(p.w - np.eye(space.dim)).max() < 1e-12


def test_conserved_quantity():
    # autonomous model, A commuting with U -> tau(A) = A
    space = ModeSpace(Box(1, 1), SPINLESS)
    m = constant_model(LongRangeModel(hopping_nn(SPINLESS, 1.0, 1), ()))
    ham = assemble_model_hamiltonian(m, space)
    u = local_energy_model(m.base, space)
    p = propagate(ham, space, 0.0, 0.9)
    evolved = heisenberg(p, u)
    assert np.abs((evolved.mat - u.mat).toarray()).max() < 1e-9


def test_autonomous_matches_eigendecomposition_oracle():
    gamma, mu = 0.9, 0.4
    space = ModeSpace(Box(1, 0), SPIN_HALF)
    m = build_bcs_model(gamma, mu)
    h = local_energy_model(m, space).mat.toarray()
    a = space.annihilator((0,), "up")
    t = 0.7
    oracle = heisenberg_eig(h, a.mat.toarray(), t)
    ham = assemble_model_hamiltonian(constant_model(m), space)
    for method, steps, tol in (("cf4", 512, 1e-8), ("eig", None, 1e-12)):
        p = propagate(ham, space, 0.0, t, steps=steps, method=method)
        got = heisenberg(p, a).mat.toarray()
        assert np.abs(got - oracle).max() < tol, method


def test_heisenberg_automorphism(chain):
    space, ham = chain
    p = propagate(ham, space, 0.0, 0.8, steps=256)
    one = space.identity()
    assert np.abs(heisenberg(p, one).mat.toarray() - np.eye(space.dim)).max() < 1e-9
    a = space.number_op((0,), "s")
    b = space.creator((0,), "s") @ space.annihilator((1,), "s")
    tau_ab = heisenberg(p, a @ b).mat.toarray()
    tau_a_tau_b = (heisenberg(p, a) @ heisenberg(p, b)).mat.toarray()
    assert np.abs(tau_ab - tau_a_tau_b).max() < 1e-9
    assert np.abs(
        heisenberg(p, a.dagger()).mat.toarray() - heisenberg(p, a).dagger().mat.toarray()
    ).max() < 1e-9
    assert abs(np.linalg.norm(heisenberg(p, b).mat.toarray(), 2) - b.norm()) < 1e-9


def test_derivation_examples(chain):
    space, ham = chain
    u = ham.matrix(0.3)
    one = space.identity()
    assert derivation(u, space, one).mat.nnz == 0
    from latticemf.fock import FockOperator

    u_op = FockOperator(space, u, support=frozenset(space.box.sites))
    d_self = derivation(u, space, u_op)
    assert np.abs(d_self.mat.toarray()).max() < 1e-12
    a = space.annihilator((0,), "s")
    lhs = derivation(u, space, a.dagger()).mat.toarray()
    rhs = derivation(u, space, a).dagger().mat.toarray()
    assert np.abs(lhs - rhs).max() < 1e-12


def test_cocycle_trivial_endpoints(chain):
    space, ham = chain
    a = space.number_op((0,), "s")
    assert cocycle_defect(ham, space, 0.2, 0.2, 1.0, a, steps=64) < 1e-12
    assert cocycle_defect(ham, space, 0.2, 1.0, 1.0, a, steps=64) < 1e-12


def test_cocycle_random_interior(chain, rng):
    space, ham = chain
    for _ in range(3):
        s, r, t = sorted(rng.uniform(0.0, 2.0, 3))
        a = space.embed(random_local_observable(rng, space.box, SPINLESS))
        assert cocycle_defect(ham, space, s, r, t, a, steps=400) < 1e-7


def test_cauchy_problems_fd_residual(chain):
    space, ham = chain
    s0, t1, h = 0.1, 0.8, 1e-4
    a = space.number_op((0,), "s")
    amat = a.mat.toarray()
    w = propagate(ham, space, s0, t1, steps=700)
    # d/dt side: tau_{t,s}(delta^{m(t)}(A))
    wp = propagate(ham, space, t1, t1 + h, steps=8)
    wm = propagate(ham, space, t1, t1 - h, steps=8)
    tau_p = wp.w @ w.w
    tau_m = wm.w @ w.w
    fd_t = (tau_p.conj().T @ amat @ tau_p - tau_m.conj().T @ amat @ tau_m) / (2 * h)
    rhs_t = w.w.conj().T @ derivation(ham.matrix(t1), space, a).mat.toarray() @ w.w
    rel_t = np.linalg.norm(fd_t - rhs_t, 2) / np.linalg.norm(rhs_t, 2)
    assert rel_t < 1e-4
    # d/ds side: -delta^{m(s)}(tau_{t,s}(A))
    wsp = propagate(ham, space, s0, s0 + h, steps=8)
    wsm = propagate(ham, space, s0, s0 - h, steps=8)
    tau_sp = w.w @ wsp.w.conj().T
    tau_sm = w.w @ wsm.w.conj().T
    fd_s = (tau_sp.conj().T @ amat @ tau_sp - tau_sm.conj().T @ amat @ tau_sm) / (2 * h)
    tau_a = w.w.conj().T @ amat @ w.w
    us = ham.matrix(s0).toarray()
    rhs_s = -1j * (us @ tau_a - tau_a @ us)
    rel_s = np.linalg.norm(fd_s - rhs_s, 2) / np.linalg.norm(rhs_s, 2)
    assert rel_s < 1e-4


def test_step_halving_order(chain):
    space, ham = chain
    ref = propagate(ham, space, 0.0, 1.0, steps=4096).w
    errs = [
        np.linalg.norm(propagate(ham, space, 0.0, 1.0, steps=n).w - ref, 2)
        for n in (32, 64, 128)
    ]
    assert errs[0] / errs[1] >= 8.0
    assert errs[1] / errs[2] >= 8.0


def test_unitarity_defect_recorded(chain):
    space, ham = chain
    p = propagate(ham, space, 0.0, 1.5, steps=300)
    assert p.unitarity_defect <= 1e-9


def test_vector_path_matches_operator_path(chain, rng):
    space, ham = chain
    psi0 = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
    psi0 /= np.linalg.norm(psi0)
    nodes = np.linspace(0.0, 1.2, 7)
    rec = propagate_vector(ham, space, 0.0, nodes, psi0)
    for k, tn in enumerate(nodes):
        wk = propagate(ham, space, 0.0, tn, steps=max(8, int(1200 * tn / 1.2)))
        assert np.abs(rec[k] - wk.w @ psi0).max() < 1e-6


def test_default_steps_scaling():
    space = ModeSpace(Box(1, 1), SPINLESS)
    ham = assemble_model_hamiltonian(
        constant_model(LongRangeModel(hopping_nn(SPINLESS, 2.0, 1), ())), space
    )
    n_short = default_steps(ham, space, 0.0, 0.1)
    n_long = default_steps(ham, space, 0.0, 1.0)
    assert n_long >= n_short
