"""Periodic states on finite boxes: products, mixtures, averages.

A product state is the restriction of the infinite tensor-power state to
the box: cells are anchored on the absolute ell-grid and cells cut by the
boundary carry the (fermionic) marginal of the cell density.  Expectations
of in-box observables therefore equal the infinite-volume product-state
values exactly, which is what makes the in-box periodicity check exact.

"Ergodic" is operationalized as: product state over ell-cells, or
user-asserted with a defect-decay diagnostic attached to reports; the
infinite-volume extreme-state characterization has no finite-box
analogue, and every report built on this tag says so.

Cell densities must be even (periodic states are even); this is enforced
at construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import pauli
from .errors import GeometryError, ResourceLimitError
from .fock import LocalOp, annihilator_local, creator_local, number_local
from .lattice import PeriodVector

log = logging.getLogger(__name__)

PERIODICITY_TOL = 1e-9
#: density-matrix product states allowed up to this many modes
DENSITY_MODE_CAP = 12


def _cell_anchors(ell, box):
    """Anchors of all ell-grid cells intersecting the box."""
    import itertools

    L = box.radius
    ranges = []
    for l in ell.ell:
        lo = -((L + l - 1) // l) * l
        ranges.append(range(lo, L + 1, l))
    return tuple(itertools.product(*ranges))


def _factor_ops(cell_matrix, ell, box, spins):
    """Per-cell factors: (kept sites, reduced density LocalOp matrix)."""
    import itertools

    cell_rel = ell.cell_sites()
    ns = len(spins)
    q = len(cell_rel) * ns
    factors = []
    for anchor in _cell_anchors(ell, box):
        abs_sites = tuple(
            tuple(a + c for a, c in zip(anchor, rel)) for rel in cell_rel
        )
        kept = tuple(s for s in abs_sites if s in box)
        if not kept:
            continue
        if len(kept) == len(abs_sites):
            factors.append((kept, cell_matrix))
            continue
        positions = []
        for i, s in enumerate(abs_sites):
            if s in box:
                positions.extend(i * ns + j for j in range(ns))
        red = pauli.fermionic_marginal(cell_matrix, q, positions)
        factors.append((kept, red))
    return factors


def _pure_part(matrix, tol=1e-10):
    """Unit vector v with matrix ~= v v†, or None if the state is mixed."""
    w, v = np.linalg.eigh(matrix)
    if w[0] < -1e-10:
        raise ValueError("cell density must be positive semidefinite")
    if w[-1] < 1.0 - tol:
        return None
    vec = v[:, -1]
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (np.conj(vec[k]) / abs(vec[k]))
    return vec


class LatticeState:
    """State on a box: pure vector or density matrix, plus a period vector."""

    def __init__(self, space, ell, vector=None, density=None, tag="custom", verify=True):
        if (vector is None) == (density is None):
            raise ValueError("give exactly one of vector/density")
        self.space = space
        self.ell = ell if isinstance(ell, PeriodVector) else PeriodVector(tuple(ell))
        self.tag = tag
        self.vector = None
        self.density = None
        if vector is not None:
            vector = np.asarray(vector, dtype=np.complex128)
            nrm = np.linalg.norm(vector)
            if abs(nrm - 1.0) > 1e-12:
                if nrm == 0:
                    raise ValueError("zero state vector")
                vector = vector / nrm
            self.vector = vector
        else:
            density = density.tocsr() if sp.issparse(density) else sp.csr_matrix(density)
            tr = density.diagonal().sum()
            if abs(tr - 1.0) > 1e-12:
                density = density * (1.0 / tr)
            self.density = density
        if verify:
            self.check_periodicity()

    @property
    def is_pure(self):
        return self.vector is not None

    def expectation(self, op):
        """rho(A); accepts a FockOperator or a LocalOp (embedded on demand)."""
        if isinstance(op, LocalOp):
            op = self.space.embed(op)
        if op.space.key() != self.space.key():
            raise ValueError("operator lives on a different mode space")
        if self.vector is not None:
            return complex(np.vdot(self.vector, op.mat @ self.vector))
        return complex((self.density.multiply(op.mat.T)).sum())

    def expectations(self, ops):
        return np.array([self.expectation(op) for op in ops])

    def check_periodicity(self, tol=PERIODICITY_TOL):
        """Probe-based in-box ell-periodicity check; raises on failure."""
        for probe in periodicity_probes(self.space.spins, self.ell):
            base = None
            for x in self.ell.lattice_points(self.space.box):
                shifted = probe.translate(x)
                if not self.space.box.contains_set(shifted.sites):
                    continue
                val = self.expectation(shifted)
                if base is None:
                    base = val
                elif abs(val - base) > tol:
                    raise ValueError(
                        f"state is not ell-periodic: probe on {probe.sites} drifts "
                        f"by {abs(val - base):.2e} under shift {x}"
                    )
        return True

    def density_matrix(self):
        if self.density is not None:
            return self.density
        v = self.vector
        return sp.csr_matrix(np.outer(v, v.conj()))

    def __repr__(self):
        kind = "pure" if self.is_pure else "density"
        return f"LatticeState({kind}, ell={self.ell.ell}, tag={self.tag})"


def periodicity_probes(spins, ell):
    """Fixed probe set: in-cell number ops, one NN hop, one pairing monomial."""
    d = ell.dimension
    origin = (0,) * d
    probes = []
    for rel in ell.cell_sites():
        for s in spins:
            probes.append(number_local(rel, spins, s))
    e0 = tuple(1 if i == 0 else 0 for i in range(d))
    for s in spins:
        hop = creator_local(origin, spins, s) @ annihilator_local(e0, spins, s)
        probes.append(hop + hop.dagger())
        break
    if len(spins) >= 2:
        pair = creator_local(origin, spins, spins[0]) @ creator_local(
            origin, spins, spins[1]
        )
        probes.append(pair)
    else:
        pair = creator_local(origin, spins, spins[0]) @ creator_local(
            e0, spins, spins[0]
        )
        probes.append(pair)
    return probes


@dataclass(frozen=True)
class ProductStateSpec:
    """Cell density plus period; realizable on any compatible box."""

    cell_matrix: np.ndarray
    ell: PeriodVector
    spins: tuple
    label: str = "product"

    def realize(self, space, force_density=False):
        return product_state(self.cell_matrix, space, self.ell, force_density)

    def content_key(self):
        import hashlib

        h = hashlib.blake2b(
            np.ascontiguousarray(self.cell_matrix).tobytes(), digest_size=16
        ).hexdigest()
        return (self.ell.ell, self.spins, h)


def product_state(cell, space, ell, force_density=False, verify=True):
    """Product (tensor-power) state over ell-cells, restricted to the box.

    `cell` is a density matrix (or pure vector) on the modes of one cell,
    must be even.  Pure cells with pure edge marginals take the vector
    path; otherwise a density matrix is built (capped at
    DENSITY_MODE_CAP modes).
    """
    ell = ell if isinstance(ell, PeriodVector) else PeriodVector(tuple(ell))
    if ell.dimension != space.box.dimension:
        raise GeometryError("period vector dimension differs from the box")
    cell = np.asarray(cell, dtype=np.complex128)
    q = len(ell.cell_sites()) * len(space.spins)
    if cell.ndim == 1:
        if cell.shape != (1 << q,):
            raise ValueError("cell vector length does not match the cell modes")
        cell = np.outer(cell, cell.conj()) / np.vdot(cell, cell)
    if cell.shape != (1 << q, 1 << q):
        raise ValueError("cell matrix shape does not match the cell modes")
    tr = np.trace(cell)
    if abs(tr) < 1e-14:
        raise ValueError("cell density has zero trace")
    cell = cell / tr
    d = pauli._popcount(np.arange(1 << q)) % 2
    signs = np.where(d, -1.0, 1.0)
    if np.abs(signs[:, None] * cell * signs[None, :] - cell).max() > 1e-10:
        raise ValueError("cell density must be even (periodic states are even)")
    factors = _factor_ops(cell, ell, space.box, space.spins)

    pure_factors = []
    all_pure = not force_density
    if all_pure:
        for kept, mat in factors:
            vec = _pure_part(mat)
            if vec is None:
                all_pure = False
                break
            pure_factors.append((kept, vec))
    if all_pure:
        psi = space.vacuum_vector()
        for kept, vec in pure_factors:
            qk = len(kept) * len(space.spins)
            creator = np.zeros((1 << qk, 1 << qk), dtype=np.complex128)
            creator[:, 0] = vec
            op = space.embed(LocalOp(kept, space.spins, creator))
            psi = op.mat @ psi
        nrm = np.linalg.norm(psi)
        if nrm < 1e-12:
            raise ValueError("degenerate product construction (zero vector)")
        return LatticeState(
            space, ell, vector=psi / nrm, tag="product", verify=verify
        )
    if space.n_modes > DENSITY_MODE_CAP:
        raise ResourceLimitError(
            f"mixed-cell product state needs a density matrix; "
            f"{space.n_modes} modes exceed cap {DENSITY_MODE_CAP}"
        )
    rho = space.identity().mat
    for kept, mat in factors:
        rho = rho @ space.embed(LocalOp(kept, space.spins, mat)).mat
    return LatticeState(space, ell, density=rho, tag="product", verify=verify)


def expectation(state, op):
    return state.expectation(op)


def space_average(a, space, ell):
    """Mean of alpha_x(A) over in-box ell-lattice translates.

    A is a LocalOp or a template-built FockOperator; translates whose
    shifted support leaves the box are dropped (boundary truncation).
    """
    local = a if isinstance(a, LocalOp) else a.local_form
    if local is None:
        raise GeometryError("space averages need an operator with a local form")
    ell = ell if isinstance(ell, PeriodVector) else PeriodVector(tuple(ell))
    total = None
    count = 0
    for x in ell.lattice_points(space.box):
        shifted = local.translate(x)
        if not space.box.contains_set(shifted.sites):
            continue
        emb = space.embed(shifted)
        total = emb if total is None else total + emb
        count += 1
    if count == 0:
        raise GeometryError("no translate of the observable fits in the box")
    return total * (1.0 / count)


def ergodicity_defect(state, a, ell=None):
    """rho(A_L† A_L) - |rho(A)|^2 for the in-box space average; >= 0."""
    ell = state.ell if ell is None else ell
    a_l = space_average(a, state.space, ell)
    val = state.expectation(a_l.dagger() @ a_l) - abs(state.expectation(a)) ** 2
    return float(val.real)


class AveragedState:
    """Functional state (1/K) sum_x rho o alpha_x (coarse-graining image).

    Expectations are evaluated by translating the observable, so they are
    exact whenever every shifted support stays inside the box.
    """

    def __init__(self, base, shifts, ell):
        self.base = base
        self.shifts = tuple(shifts)
        self.ell = ell
        self.space = base.space
        self.tag = "coarse"
        self.is_pure = False

    def expectation(self, op):
        local = op if isinstance(op, LocalOp) else op.local_form
        if local is None:
            raise GeometryError("coarse-grained expectations need a local form")
        total = 0.0 + 0.0j
        for x in self.shifts:
            shifted = local.translate(x)
            if not self.space.box.contains_set(shifted.sites):
                raise GeometryError(
                    f"translate by {x} leaves the box; enlarge the box for this probe"
                )
            total += self.base.expectation(shifted)
        return total / len(self.shifts)

    def expectations(self, ops):
        return np.array([self.expectation(op) for op in ops])

    def check_periodicity(self, tol=PERIODICITY_TOL):
        for probe in periodicity_probes(self.space.spins, self.ell):
            base_val = None
            for x in self.ell.lattice_points(self.space.box):
                shifted = probe.translate(x)
                try:
                    val = self.expectation(shifted)
                except GeometryError:
                    continue
                if base_val is None:
                    base_val = val
                elif abs(val - base_val) > tol:
                    raise ValueError(
                        f"coarse-grained state fails ell2-periodicity by {abs(val - base_val):.2e}"
                    )
        return True


def coarse_grain(state, ell1, ell2):
    """x_{ell1,ell2}(rho): convex mean of translates over one ell1-cell.

    Requires Z^d_{ell1} <= Z^d_{ell2} (each ell2_i divides ell1_i).  The
    result is ell2-periodic and satisfies
    rho(e_{Phi,ell1}) = x(rho)(e_{Phi,ell2}) on in-box test interactions.
    """
    import itertools

    ell1 = ell1 if isinstance(ell1, PeriodVector) else PeriodVector(tuple(ell1))
    ell2 = ell2 if isinstance(ell2, PeriodVector) else PeriodVector(tuple(ell2))
    if not ell1.divides(ell2):
        raise GeometryError(
            f"divisibility violated: each entry of {ell2.ell} must divide {ell1.ell}"
        )
    if ell1.ell == ell2.ell:
        return state
    ranges = [range(0, l1, l2) for l1, l2 in zip(ell1.ell, ell2.ell)]
    shifts = tuple(itertools.product(*ranges))
    return AveragedState(state, shifts, ell2)


class Mixture:
    """Finite convex mixture of (ergodic-tagged) states or state specs."""

    def __init__(self, weights, components, probe=None):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            weights = weights / weights.sum()
        self.weights = tuple(float(w) for w in weights)
        self.components = tuple(components)
        if len(self.weights) != len(self.components):
            raise ValueError("weights/components length mismatch")
        self.degenerate = False
        keys = []
        for c in self.components:
            keys.append(c.content_key() if hasattr(c, "content_key") else id(c))
        if len(set(keys)) != len(keys):
            self.degenerate = True
            log.warning(
                "mixture has coinciding components; treating as a degenerate "
                "(affine) mixture"
            )

    def realize(self, space):
        states = [
            c.realize(space) if hasattr(c, "realize") else c for c in self.components
        ]
        return list(zip(self.weights, states))

    def expectation(self, space, op):
        return sum(w * s.expectation(op) for w, s in self.realize(space))


def evolve_mixture(mixture, td_model, s, grid_nodes, space_eff, space_obs, **solver_kw):
    """Per-fiber self-consistency plus a mixed-expectation evaluator.

    Each component evolves under its OWN flow (the finite-mixture shadow
    of the fiber decomposition).  Returns (list of FlowTrajectory, evaluator)
    where evaluator(A, B, t) = sum_i w_i rho_i(B† tau_i(A) B).
    """
    from .meanfield import solve_self_consistency_windowed, effective_expectation

    fibers = []
    for w, comp in zip(mixture.weights, mixture.components):
        state0 = comp.realize(space_eff) if hasattr(comp, "realize") else comp
        traj = solve_self_consistency_windowed(
            td_model, state0, s, grid_nodes, **solver_kw
        )
        fibers.append((w, comp, traj))

    def evaluator(a_local, b_local, t):
        total = 0.0 + 0.0j
        for w, comp, traj in fibers:
            state_l = comp.realize(space_obs) if hasattr(comp, "realize") else comp
            val = effective_expectation(
                td_model, traj, space_obs, state_l, a_local, b_local, s, t
            )
            total += w * val
        return total

    return [t for _, _, t in fibers], evaluator
