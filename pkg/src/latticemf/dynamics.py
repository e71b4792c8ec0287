"""Finite-volume non-autonomous Heisenberg dynamics tau^(L,m)_{t,s}.

The propagator W(t,s) solves the Schrödinger problem
i dW/dt = H(t) W, W(s,s) = 1, and heisenberg(A) = W† A W then satisfies
both defining Cauchy problems of the dynamics (d/dt tau = tau o delta(t),
d/ds tau = -delta(s) o tau) together with the reverse cocycle property
tau_{t,s} = tau_{r,s} o tau_{t,r}.

Integrator: fixed-step 4th-order commutator-free scheme (two Gauss-node
Hamiltonian evaluations and two exponentials per step), with periodic
Newton-Schulz re-unitarization of the accumulated propagator.  Autonomous
models additionally get an exact eigendecomposition path ("eig"), used
automatically when available since it solves the same Cauchy problems
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import IntegratorError
from .fock import FockOperator
from .hamiltonians import TimeDependentHamiltonian
from .linalg import apply_expm, frobenius

_SQ3 = math.sqrt(3.0)
GAUSS_C1 = 0.5 - _SQ3 / 6.0
GAUSS_C2 = 0.5 + _SQ3 / 6.0
CF4_A1 = 0.25 + _SQ3 / 6.0
CF4_A2 = 0.25 - _SQ3 / 6.0

#: default target for ||H|| * dt per step
STEP_TARGET = 0.005
MIN_STEPS = 8
MAX_STEPS = 400_000
UNITARITY_TOL = 1e-9
REUNIT_EVERY = 64


@dataclass(frozen=True)
class TimeGrid:
    """Uniform step grid from start to stop (backward allowed)."""

    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one step")

    @property
    def h(self):
        return (self.stop - self.start) / self.steps

    def nodes(self):
        return np.linspace(self.start, self.stop, self.steps + 1)


def _as_hamiltonian(ham, space):
    if isinstance(ham, TimeDependentHamiltonian):
        return ham
    if isinstance(ham, FockOperator):
        mat = ham.mat
    elif sp.issparse(ham):
        mat = ham
    else:
        raise TypeError(f"cannot interpret {type(ham)} as a Hamiltonian")
    const = lambda t: 1.0  # noqa: E731
    const.is_constant = True
    return TimeDependentHamiltonian(space, [(mat, const)])


def default_steps(ham, space, s, t, target=STEP_TARGET):
    """Step count so that ||H|| * dt <= target, estimated at time s."""
    if t == s:
        return 1
    nrm = max(_as_hamiltonian(ham, space).norm_estimate_at(s), 1e-12)
    n = int(math.ceil(abs(t - s) * nrm / target))
    return max(MIN_STEPS, min(n, MAX_STEPS))


def _cf4_exponents(ham, t0, h):
    """The two per-step exponents -i h (a H(t1) + b H(t2)) as sparse matrices."""
    t1 = t0 + GAUSS_C1 * h
    t2 = t0 + GAUSS_C2 * h
    m_first = ham.combination([(-1j * h * CF4_A1, t1), (-1j * h * CF4_A2, t2)])
    m_second = ham.combination([(-1j * h * CF4_A2, t1), (-1j * h * CF4_A1, t2)])
    return m_first, m_second


class Propagator:
    """Unitary W(t, s) on the box Fock space, with integrator metadata."""

    __slots__ = ("space", "s", "t", "w", "method", "steps", "unitarity_defect")

    def __init__(self, space, s, t, w, method, steps, unitarity_defect):
        self.space = space
        self.s = s
        self.t = t
        self.w = w
        self.method = method
        self.steps = steps
        self.unitarity_defect = unitarity_defect

    def apply(self, vec):
        return self.w @ vec

    def conjugate(self, a):
        """heisenberg(A) = W† A W."""
        if a.space.key() != self.space.key():
            raise ValueError("operator lives on a different mode space")
        mat = self.w.conj().T @ (a.mat @ self.w)
        return FockOperator(
            self.space,
            sp.csr_matrix(mat),
            support=frozenset(self.space.box.sites),
            parity=a.parity,
        )

    def __repr__(self):
        return (
            f"Propagator(s={self.s}, t={self.t}, method={self.method}, "
            f"steps={self.steps}, defect={self.unitarity_defect:.2e})"
        )


def _reunitarize(w):
    """One Newton-Schulz step toward the polar factor (near-unitary input)."""
    return w @ (1.5 * np.eye(w.shape[0]) - 0.5 * (w.conj().T @ w))


def _unitarity_defect(w):
    return float(np.linalg.norm(w.conj().T @ w - np.eye(w.shape[0])))


def propagate(ham, space, s, t, steps=None, method="auto", unitarity_tol=UNITARITY_TOL):
    """Propagator W(t,s) for the (possibly time-dependent) Hamiltonian.

    method "cf4": fixed-step commutator-free 4th order (general).
    method "eig": exact eigendecomposition (autonomous Hamiltonians only).
    method "auto": eig when constant, else cf4.
    """
    space.require_dense()
    ham = _as_hamiltonian(ham, space)
    if method == "auto":
        method = "eig" if ham.is_constant else "cf4"
    if method == "eig":
        if not ham.is_constant:
            raise ValueError("eig propagation requires an autonomous Hamiltonian")
        h_dense = ham.matrix(s).toarray()
        if frobenius(h_dense - h_dense.conj().T) > 1e-9:
            raise IntegratorError("Hamiltonian is not self-adjoint")
        vals, vecs = np.linalg.eigh(h_dense)
        w = (vecs * np.exp(-1j * (t - s) * vals)) @ vecs.conj().T
        return Propagator(space, s, t, w, "eig", 1, _unitarity_defect(w))
    if steps is None:
        steps = default_steps(ham, space, s, t)
    if t == s:
        return Propagator(space, s, t, np.eye(space.dim, dtype=np.complex128), "cf4", 0, 0.0)
    h = (t - s) / steps
    w = np.eye(space.dim, dtype=np.complex128)
    for k in range(steps):
        m1, m2 = _cf4_exponents(ham, s + k * h, h)
        w = apply_expm(m2, apply_expm(m1, w))
        if (k + 1) % REUNIT_EVERY == 0:
            if _unitarity_defect(w) > 0.5 * unitarity_tol:
                w = _reunitarize(w)
    defect = _unitarity_defect(w)
    if defect > 0.5 * unitarity_tol:
        w = _reunitarize(w)
        defect = _unitarity_defect(w)
    if defect > unitarity_tol:
        raise IntegratorError(
            f"unitarity defect {defect:.3e} above tolerance; reduce the step size"
        )
    return Propagator(space, s, t, w, "cf4", steps, defect)


def propagate_vector(ham, space, s, node_times, psi0, substep_target=STEP_TARGET):
    """Schrödinger evolution of a state vector, recorded at node times.

    Returns an array [len(node_times), dim] with psi(t_k) = W(t_k, s) psi0.
    Node times must be reachable monotonically from s.  Works above the
    dense-matrix cap (expectation-only path).
    """
    ham = _as_hamiltonian(ham, space)
    psi = np.array(psi0, dtype=np.complex128)
    out = np.empty((len(node_times), space.dim), dtype=np.complex128)
    eig_cache = None
    if ham.is_constant and space.dense_ok:
        h_dense = ham.matrix(s).toarray()
        vals, vecs = np.linalg.eigh(h_dense)
        eig_cache = (vals, vecs)
    t_cur = s
    nrm = None
    for k, t_node in enumerate(node_times):
        dt = t_node - t_cur
        if dt != 0.0:
            if eig_cache is not None:
                vals, vecs = eig_cache
                psi = vecs @ (np.exp(-1j * dt * vals) * (vecs.conj().T @ psi))
            else:
                if nrm is None:
                    nrm = max(ham.norm_estimate_at(t_cur), 1e-12)
                n_sub = max(1, int(math.ceil(abs(dt) * nrm / substep_target)))
                h = dt / n_sub
                for j in range(n_sub):
                    m1, m2 = _cf4_exponents(ham, t_cur + j * h, h)
                    psi = apply_expm(m2, apply_expm(m1, psi))
            t_cur = t_node
        out[k] = psi
    return out


# -- spec operations ------------------------------------------------------------


def derivation(generator, space, a):
    """delta(A) = i [U, A] for a local Hamiltonian (or model at fixed time)."""
    if isinstance(generator, FockOperator):
        u = generator.mat
    elif sp.issparse(generator):
        u = generator
    else:
        from .hamiltonians import local_energy_model

        u = local_energy_model(generator, space).mat
    mat = 1j * (u @ a.mat - a.mat @ u)
    return FockOperator(
        space, mat, support=frozenset(space.box.sites), parity=a.parity
    )


def heisenberg(propagator, a):
    """tau_{t,s}(A) = W(t,s)† A W(t,s)."""
    return propagator.conjugate(a)


def cocycle_defect(ham, space, s, r, t, a, steps=None):
    """|| tau_{t,s}(A) - tau_{r,s}(tau_{t,r}(A)) || (spectral norm)."""
    ham = _as_hamiltonian(ham, space)
    w_ts = propagate(ham, space, s, t, steps=steps)
    w_rs = propagate(ham, space, s, r, steps=steps)
    w_tr = propagate(ham, space, r, t, steps=steps)
    direct = w_ts.conjugate(a)
    composed = w_rs.conjugate(w_tr.conjugate(a))
    from .linalg import spectral_norm

    return spectral_norm((direct - composed).mat)
