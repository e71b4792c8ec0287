"""Interaction spaces and long-range models with their norms.

An Interaction maps finite site sets to even local operators (LocalOp
templates, instantiable in any box).  Translation-invariant interactions
store one anchored template per translation orbit (bounding corner at the
origin) and are tiled into a box on demand; the energy-density observable
condition (the realized support of e_{Phi,ell} is the union of the tiled
term supports) holds by construction.

A long-range model is a pair (Phi, a): a self-adjoint short-range part
plus a finite list of signed atoms over tuples of unit-norm interactions.
All norms are box-restricted: the decay-function constants and the
interaction norm are finite sums over the working box, and every report
built from them is labeled accordingly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .fock import (
    LOCAL_MODE_CAP,
    PARITY_TOL,
    SPIN_HALF,
    LocalOp,
    annihilator_local,
    creator_local,
    number_local,
)


def _anchor_shift(sites):
    """Shift taking the componentwise-min corner of `sites` to the origin."""
    d = len(sites[0])
    return tuple(-min(s[i] for s in sites) for i in range(d))


class Interaction:
    """Finite family of even local terms, optionally translation-invariant."""

    __slots__ = ("terms", "translation_invariant", "spins")

    def __init__(self, terms, translation_invariant, spins, check_even=True):
        spins = tuple(spins)
        clean = {}
        for op in terms:
            if op.spins != spins:
                raise ValueError("term spin set differs from interaction spin set")
            if not np.any(op.matrix):
                continue
            if check_even and not op.is_even(PARITY_TOL):
                raise ValueError(f"interaction term on {op.sites} is not even")
            if translation_invariant:
                op = op.translate(_anchor_shift(op.sites))
            if op.sites in clean:
                raise ValueError(
                    f"duplicate term for site set {op.sites}; sum the matrices instead"
                )
            clean[op.sites] = op
        self.terms = tuple(clean[k] for k in sorted(clean))
        self.translation_invariant = bool(translation_invariant)
        self.spins = spins

    # -- structure ---------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def term_norms(self):
        return tuple(op.norm() for op in self.terms)

    def range_extent(self):
        """Componentwise extent of the largest term bounding box."""
        if not self.terms:
            return ()
        d = len(self.terms[0].sites[0])
        ext = [0] * d
        for op in self.terms:
            for i in range(d):
                coords = [s[i] for s in op.sites]
                ext[i] = max(ext[i], max(coords) - min(coords))
        return tuple(ext)

    def __mul__(self, c):
        return Interaction(
            (op * c for op in self.terms),
            self.translation_invariant,
            self.spins,
            check_even=False,
        )

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Interaction):
            return NotImplemented
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if (
            self.translation_invariant != other.translation_invariant
            or self.spins != other.spins
        ):
            raise ValueError("cannot add interactions with different structure")
        merged = {op.sites: op for op in self.terms}
        for op in other.terms:
            if op.sites in merged:
                merged[op.sites] = merged[op.sites] + op
            else:
                merged[op.sites] = op
        return Interaction(
            merged.values(), self.translation_invariant, self.spins, check_even=False
        )

    def involution(self):
        """Phi* : termwise adjoint."""
        return Interaction(
            (op.dagger() for op in self.terms),
            self.translation_invariant,
            self.spins,
            check_even=False,
        )

    def is_selfadjoint(self, tol=1e-10):
        return self.close_to(self.involution(), tol)

    def close_to(self, other, tol=1e-10):
        if self.spins != other.spins or len(self.terms) != len(other.terms):
            return False
        mine = {op.sites: op for op in self.terms}
        theirs = {op.sites: op for op in other.terms}
        if set(mine) != set(theirs):
            return False
        return all(
            np.abs(mine[k].matrix - theirs[k].matrix).max() <= tol for k in mine
        )

    def content_key(self):
        return tuple(op.content_key() for op in self.terms) + (
            self.translation_invariant,
        )

    # -- instantiation -------------------------------------------------------

    def tile(self, box):
        """Yield (absolute LocalOp) for every term instance inside the box.

        Translation-invariant interactions are tiled over all in-box
        translates of each anchored orbit representative; others are
        restricted to terms already inside the box.
        """
        if not self.terms:
            return
        if not self.translation_invariant:
            for op in self.terms:
                if box.contains_set(op.sites):
                    yield op
            return
        L = box.radius
        d = box.dimension
        for op in self.terms:
            ext = [
                (min(s[i] for s in op.sites), max(s[i] for s in op.sites))
                for i in range(d)
            ]
            axis_ranges = [range(-L - lo, L - hi + 1) for lo, hi in ext]
            for x in itertools.product(*axis_ranges):
                yield op.translate(x)

    def w_norm(self, F, box):
        """Box-restricted interaction norm.

        max over site pairs (x, y) in the box of
        sum_{tiled Z containing both} ||Phi_Z|| / F(x, y).
        """
        pair_sums = {}
        for op in self.tile(box):
            nrm = op.norm()
            for x, y in itertools.combinations_with_replacement(op.sites, 2):
                pair_sums[(x, y)] = pair_sums.get((x, y), 0.0) + nrm
        if not pair_sums:
            return 0.0
        return max(v / F(x, y) for (x, y), v in pair_sums.items())

    def energy_density(self, ell):
        """Energy-density observable e_{Phi,ell} as an EnergyDensity.

        e = (1/prod ell) sum_{x in cell} sum_{Z containing x} Phi_Z / |Z|,
        with Z running over all translates of the anchored templates.
        """
        if not self.translation_invariant:
            raise ValueError("energy density requires a translation-invariant interaction")
        if not self.terms:
            raise ValueError("energy density of the zero interaction is trivial; not built")
        total = None
        scale = 1.0 / ell.cell_volume
        for x in ell.cell_sites():
            for op in self.terms:
                w = scale / len(op.sites)
                for g in op.sites:
                    shift = tuple(xi - gi for xi, gi in zip(x, g))
                    piece = op.translate(shift) * w
                    total = piece if total is None else total + piece
        if total.n_modes > LOCAL_MODE_CAP:
            raise ResourceLimitError(
                f"energy density support needs {total.n_modes} local modes (cap {LOCAL_MODE_CAP})"
            )
        return EnergyDensity(total, ell)

    def __repr__(self):
        kind = "TI" if self.translation_invariant else "fixed"
        return f"Interaction({kind}, terms={[op.sites for op in self.terms]})"


def zero_interaction(spins, translation_invariant=True):
    return Interaction((), translation_invariant, spins)


@dataclass(frozen=True)
class EnergyDensity:
    """Even observable e_{Phi,ell} together with its support."""

    operator: LocalOp
    ell: object

    @property
    def support_sites(self):
        return self.operator.sites

    def norm(self):
        return self.operator.norm()


# -- long-range models ---------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """One discrete signed-measure atom: weight times an interaction tuple."""

    weight: float
    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise ValueError("atom needs at least one factor interaction")

    @property
    def order(self):
        return len(self.factors)

    def reversed_conjugate(self):
        """Image under (w, (Psi1..Psin)) -> (w, (Psin*, ..., Psi1*))."""
        return Atom(self.weight, tuple(f.involution() for f in reversed(self.factors)))


def s_norm(atoms, norm_f1):
    """sum_n n^2 normF1^(n-1) * (total absolute weight of order-n atoms)."""
    total = 0.0
    for atom in atoms:
        n = atom.order
        total += n * n * norm_f1 ** (n - 1) * abs(atom.weight)
    return total


@dataclass(frozen=True)
class LongRangeModel:
    """Pair (Phi, a): short-range interaction plus finite atom list."""

    phi: Interaction
    atoms: tuple = ()

    @property
    def spins(self):
        return self.phi.spins

    def m_norm(self, F, box):
        norm_f1, _ = F.constants(box)
        return self.phi.w_norm(F, box) + s_norm(self.atoms, norm_f1)

    def factor_slots(self):
        """(atom index, slot index, factor) for every tuple entry."""
        return tuple(
            (ai, j, f)
            for ai, atom in enumerate(self.atoms)
            for j, f in enumerate(atom.factors)
        )

    def distinct_factors(self):
        """Distinct factor interactions in first-appearance order."""
        seen, out = {}, []
        for _, _, f in self.factor_slots():
            k = f.content_key()
            if k not in seen:
                seen[k] = len(out)
                out.append(f)
        return tuple(out)

    def selfadjoint_check(self, tol=1e-10, F=None, box=None):
        """Reversal-closure of the atom list plus Phi* = Phi.

        With (F, box) given, additionally checks every factor has unit
        box-restricted W-norm to 1e-9.
        """
        if not self.phi.is_zero() and not self.phi.is_selfadjoint(tol):
            return False
        if F is not None and box is not None:
            for _, _, f in self.factor_slots():
                if abs(f.w_norm(F, box) - 1.0) > 1e-9:
                    return False
        unmatched = list(range(len(self.atoms)))
        for i in list(unmatched):
            if i not in unmatched:
                continue
            target = self.atoms[i].reversed_conjugate()
            partner = None
            for j in unmatched:
                cand = self.atoms[j]
                if cand.order != target.order:
                    continue
                if abs(cand.weight - target.weight) > tol:
                    continue
                if all(
                    a.close_to(b, tol) for a, b in zip(cand.factors, target.factors)
                ):
                    partner = j
                    break
            if partner is None:
                return False
            unmatched.remove(i)
            if partner != i and partner in unmatched:
                unmatched.remove(partner)
        return True


def model_selfadjoint_check(model, tol=1e-10, F=None, box=None):
    return model.selfadjoint_check(tol, F, box)


def m_norm(model, F, box):
    return model.m_norm(F, box)


# -- time-dependent coefficient schedules ---------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Scalar coefficient schedule: constant, linear ramp, or sinusoidal."""

    kind: str = "constant"
    value: float = 1.0
    slope: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    KINDS = ("constant", "ramp", "sine")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def __call__(self, t):
        if self.kind == "constant":
            return self.value
        if self.kind == "ramp":
            return self.value + self.slope * t
        return self.value + self.amplitude * math.sin(self.omega * t + self.phase)

    @property
    def is_constant(self):
        return self.kind == "constant"


CONST_ONE = Schedule()


@dataclass(frozen=True)
class TimeDependentModel:
    """m(t): scalar schedules applied to Phi and to the atom weights."""

    base: LongRangeModel
    phi_schedule: Schedule = CONST_ONE
    atom_schedules: tuple = ()

    def __post_init__(self):
        if self.atom_schedules and len(self.atom_schedules) != len(self.base.atoms):
            raise ValueError("need one schedule per atom (or none)")
        if not self.atom_schedules:
            object.__setattr__(
                self, "atom_schedules", tuple(CONST_ONE for _ in self.base.atoms)
            )
        # m(t) must stay a self-adjoint model; schedules that break the
        # reversal pairing of the atom list would make U_L^m(t) non-Hermitian.
        for t_probe in (0.0, 0.3183098861837907, 1.0):
            if not self.at(t_probe).selfadjoint_check(1e-9):
                raise ValueError(
                    "time-dependent model is not self-adjoint at "
                    f"t={t_probe}; reversal-paired atoms must share schedules"
                )

    @property
    def spins(self):
        return self.base.spins

    @property
    def is_autonomous(self):
        return self.phi_schedule.is_constant and all(
            s.is_constant for s in self.atom_schedules
        )

    def at(self, t):
        """Materialized LongRangeModel at time t."""
        phi = self.base.phi * self.phi_schedule(t)
        atoms = tuple(
            Atom(atom.weight * sched(t), atom.factors)
            for atom, sched in zip(self.base.atoms, self.atom_schedules)
        )
        return LongRangeModel(phi, atoms)

    def m_norm_fn(self, F, box):
        """t -> ||m(t)||_M using precomputed base norms (box-restricted)."""
        norm_f1, _ = F.constants(box)
        w_base = self.base.phi.w_norm(F, box)
        atom_factors = tuple(
            a.order * a.order * norm_f1 ** (a.order - 1) * abs(a.weight)
            for a in self.base.atoms
        )

        def fn(t):
            total = abs(self.phi_schedule(t)) * w_base
            for fac, sched in zip(atom_factors, self.atom_schedules):
                total += fac * abs(sched(t))
            return total

        return fn


def constant_model(model):
    return TimeDependentModel(model)


# -- named interaction families --------------------------------------------------


def onsite_from_localop(op):
    """TI interaction whose single anchored term is the given on-site LocalOp."""
    if len(op.sites) != 1:
        raise ValueError("on-site interaction needs a single-site LocalOp")
    return Interaction((op,), True, op.spins)


def number_onsite(spins, coeff=1.0, d=1):
    """coeff * sum_s n_{x,s}: the on-site number interaction."""
    origin = (0,) * d
    total = None
    for s in spins:
        piece = number_local(origin, spins, s)
        total = piece if total is None else total + piece
    return onsite_from_localop(total * coeff)


def hopping_nn(spins, coeff=1.0, d=1):
    """-coeff * sum_s (a†_{x,s} a_{x+e_i,s} + h.c.) over the d axes."""
    terms = []
    for axis in range(d):
        e = tuple(1 if i == axis else 0 for i in range(d))
        origin = (0,) * d
        total = None
        for s in spins:
            hop = creator_local(origin, spins, s) @ annihilator_local(e, spins, s)
            piece = hop + hop.dagger()
            total = piece if total is None else total + piece
        terms.append(total * (-coeff))
    return Interaction(terms, True, spins)


def pairing_create(d=1):
    """On-site pair creation a†_{x,up} a†_{x,down}; unit W-norm for any F."""
    origin = (0,) * d
    op = creator_local(origin, SPIN_HALF, "up") @ creator_local(origin, SPIN_HALF, "down")
    return Interaction((op,), True, SPIN_HALF)


def pairing_annihilate(d=1):
    return pairing_create(d).involution()


def build_bcs_model(gamma, mu, hopping=0.0, d=1):
    """Reduced BCS model on Z^d with spin set {up, down}.

    Short-range part: on-site -mu (n_up + n_down), plus optional
    nearest-neighbor hopping.  Long-range part: the single order-2 atom
    (-gamma, (pair-create, pair-annihilate)), which reproduces
    -(gamma/|Lambda_L|) sum_{x,y} a†_{x,up} a†_{x,down} a_{y,down} a_{y,up}
    in the local Hamiltonian and is closed under the reversal involution.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    phi = number_onsite(SPIN_HALF, -mu, d)
    if hopping != 0.0:
        phi = phi + hopping_nn(SPIN_HALF, hopping, d)
    atoms = ()
    if gamma != 0.0:
        atoms = (Atom(-float(gamma), (pairing_create(d), pairing_annihilate(d))),)
    return LongRangeModel(phi, atoms)
