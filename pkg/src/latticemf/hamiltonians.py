"""Local energies U_L^Phi and U_L^m, plus time-dependent assembly.

Long-range atoms contribute ordered products of factor local energies
with the 1/|Lambda_L|^(n-1) mean-field prefactor; self-adjointness of the
total comes from the model's reversal-closed atom list, never from extra
symmetrization here.

Time-dependent models have scalar coefficient schedules only, so H(t) is
always a fixed set of sparse pieces combined with time-dependent scalars;
`TimeDependentHamiltonian` pre-aligns the sparsity patterns once and then
evaluates H(t) with one fused-data sum per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import FockOperator
from .linalg import norm_estimate


@dataclass(frozen=True)
class LocalHamiltonian:
    """U_L for a short-range interaction or a long-range model."""

    op: FockOperator
    source: str
    time: float | None = None

    def norm(self):
        return self.op.norm()


def local_energy(phi, space):
    """U_L^Phi = sum of all (tiled) interaction terms inside the box."""
    if phi.spins != space.spins:
        raise ValueError("interaction and space spin sets differ")
    mat = sp.csr_matrix((space.dim, space.dim), dtype=np.complex128)
    support = set()
    any_term = False
    for op in phi.tile(space.box):
        emb = space.embed(op)
        mat = mat + emb.mat
        support |= set(op.sites)
        any_term = True
    if not any_term:
        return FockOperator(space, mat, support=frozenset(), parity="even")
    return FockOperator(space, mat, support=frozenset(support), parity="even")


def local_energy_model(model, space):
    """U_L^m = U_L^Phi + sum_atoms w/|Lambda_L|^(n-1) * prod_j U_L^(Psi_j)."""
    total = local_energy(model.phi, space).mat
    vol = len(space.box)
    cache = {}

    def factor_energy(f):
        key = f.content_key()
        if key not in cache:
            cache[key] = local_energy(f, space).mat
        return cache[key]

    for atom in model.atoms:
        prod = None
        for f in atom.factors:
            u = factor_energy(f)
            prod = u if prod is None else prod @ u
        total = total + (atom.weight / vol ** (atom.order - 1)) * prod
    return FockOperator(
        space, total, support=frozenset(space.box.sites), parity="even"
    )


class TimeDependentHamiltonian:
    """H(t) = sum_k c_k(t) M_k over a shared sparsity pattern."""

    def __init__(self, space, pieces):
        """pieces: iterable of (sparse matrix, callable t -> scalar)."""
        self.space = space
        pieces = [(m.tocsr(), fn) for m, fn in pieces]
        self.coeff_fns = [fn for _, fn in pieces]
        dim = space.dim
        if not pieces:
            self._pattern = sp.csr_matrix((dim, dim), dtype=np.complex128)
            self._data = np.zeros((0, 0), dtype=np.complex128)
            return
        pattern = None
        for m, _ in pieces:
            absm = abs(m)
            pattern = absm if pattern is None else pattern + absm
        pattern = pattern.tocsr()
        pattern.sort_indices()
        self._pattern = pattern
        keys_union = self._linear_keys(pattern)
        self._data = np.zeros((len(pieces), pattern.nnz), dtype=np.complex128)
        for k, (m, _) in enumerate(pieces):
            m = m.tocsr()
            m.sort_indices()
            pos = np.searchsorted(keys_union, self._linear_keys(m))
            self._data[k, pos] = m.data

    @staticmethod
    def _linear_keys(m):
        coo = m.tocoo()
        return np.asarray(coo.row, dtype=np.int64) * m.shape[1] + coo.col

    @property
    def is_constant(self):
        return all(getattr(fn, "is_constant", False) for fn in self.coeff_fns)

    def coefficients(self, t):
        return np.array([fn(t) for fn in self.coeff_fns], dtype=np.complex128)

    def matrix(self, t):
        """Sparse H(t)."""
        if self._data.shape[0] == 0:
            return self._pattern.copy()
        data = self.coefficients(t) @ self._data
        return sp.csr_matrix(
            (data, self._pattern.indices, self._pattern.indptr),
            shape=self._pattern.shape,
        )

    def combination(self, weights_and_times):
        """Sparse sum_i w_i H(t_i) (one fused evaluation)."""
        if self._data.shape[0] == 0:
            return self._pattern.copy()
        coeff = np.zeros(self._data.shape[0], dtype=np.complex128)
        for w, t in weights_and_times:
            coeff += w * self.coefficients(t)
        data = coeff @ self._data
        return sp.csr_matrix(
            (data, self._pattern.indices, self._pattern.indptr),
            shape=self._pattern.shape,
        )

    def norm_estimate_at(self, t):
        return norm_estimate(self.matrix(t))


class _ScheduleCoeff:
    """Adapter making schedule-backed coefficients introspectable."""

    __slots__ = ("schedule", "scale")

    def __init__(self, schedule, scale=1.0):
        self.schedule = schedule
        self.scale = scale

    def __call__(self, t):
        return self.scale * self.schedule(t)

    @property
    def is_constant(self):
        return self.schedule.is_constant


def assemble_model_hamiltonian(td_model, space):
    """TimeDependentHamiltonian for the full model m(t) on the box.

    One piece for the short-range part (its schedule), one constant-factor
    piece per atom carrying w_a/|Lambda_L|^(n-1) * prod U_L^(Psi_j) with the
    atom's weight schedule.
    """
    base = td_model.base
    vol = len(space.box)
    pieces = []
    u_phi = local_energy(base.phi, space).mat
    if u_phi.nnz:
        pieces.append((u_phi, _ScheduleCoeff(td_model.phi_schedule)))
    cache = {}
    for atom, sched in zip(base.atoms, td_model.atom_schedules):
        prod = None
        for f in atom.factors:
            key = f.content_key()
            if key not in cache:
                cache[key] = local_energy(f, space).mat
            u = cache[key]
            prod = u if prod is None else prod @ u
        scale = atom.weight / vol ** (atom.order - 1)
        pieces.append((prod, _ScheduleCoeff(sched, scale)))
    return TimeDependentHamiltonian(space, pieces)
