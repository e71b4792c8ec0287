"""Finite cubic boxes in Z^d, site-set translations, and decay functions.

Sites are integer tuples of length d.  The working box with radius L is
{-L..L}^d, listed in lexicographic order; every mode/matrix layout in the
package derives from that order, so it is fixed here once.

Decay functions F(x, y) depend on x - y only, are symmetric, take values
in (0, 1] with F(x, x) = 1, and come in exactly two families (exponential
and inverse-polynomial).  Their two summability constants are evaluated as
finite sums restricted to a box; the infinite-lattice suprema are never
attempted and every report built on top of these constants says
"box-restricted".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import GeometryError, ResourceLimitError

#: default bound on d * (2L+1)^d when generating a box
DEFAULT_SITE_CAP = 20_000

Site = tuple


def box_sites(d, L, site_cap=DEFAULT_SITE_CAP):
    """All sites x with max_i |x_i| <= L, lexicographically ordered.

    Raises ResourceLimitError when d * (2L+1)^d exceeds `site_cap`.
    """
    if d < 1:
        raise GeometryError(f"dimension must be >= 1, got {d}")
    if L < 0:
        raise GeometryError(f"box radius must be >= 0, got {L}")
    volume = (2 * L + 1) ** d
    if d * volume > site_cap:
        raise ResourceLimitError(
            f"site cap exceeded: d*(2L+1)^d = {d * volume} > {site_cap}"
        )
    return tuple(itertools.product(range(-L, L + 1), repeat=d))


def translate_set(sites, x):
    """Elementwise shift of a site set by the vector x."""
    return tuple(tuple(s + dx for s, dx in zip(site, x)) for site in sites)


@dataclass(frozen=True)
class Box:
    """Cubic box Lambda_L = {-L..L}^d with its ordered site list."""

    dimension: int
    radius: int
    site_cap: int = DEFAULT_SITE_CAP
    sites: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "sites", box_sites(self.dimension, self.radius, self.site_cap)
        )

    def __len__(self):
        return len(self.sites)

    def __contains__(self, site):
        return len(site) == self.dimension and all(
            abs(c) <= self.radius for c in site
        )

    def contains_set(self, sites):
        return all(s in self for s in sites)

    def site_rank(self, site):
        """Position of `site` in the lexicographic site list."""
        if site not in self:
            raise GeometryError(f"site {site} outside box L={self.radius}")
        rank = 0
        width = 2 * self.radius + 1
        for c in site:
            rank = rank * width + (c + self.radius)
        return rank


@dataclass(frozen=True)
class PeriodVector:
    """Period vector ell = (ell_1, ..., ell_d), all entries >= 1."""

    ell: tuple

    def __post_init__(self):
        if not self.ell or any(int(l) != l or l < 1 for l in self.ell):
            raise GeometryError(f"period vector entries must be integers >= 1: {self.ell}")
        object.__setattr__(self, "ell", tuple(int(l) for l in self.ell))

    @property
    def dimension(self):
        return len(self.ell)

    @property
    def cell_volume(self):
        return math.prod(self.ell)

    def cell_sites(self):
        """The fundamental cell {0..ell_1-1} x ... x {0..ell_d-1}."""
        return tuple(itertools.product(*[range(l) for l in self.ell]))

    def lattice_points(self, box):
        """Lambda_L intersected with the subgroup ell_1 Z x ... x ell_d Z."""
        ranges = []
        for l in self.ell:
            lo = -(box.radius // l)
            hi = box.radius // l
            ranges.append([k * l for k in range(lo, hi + 1)])
        return tuple(itertools.product(*ranges))

    def divides(self, other):
        """True when Z^d_self is a subgroup of Z^d_other (other_i | self_i)."""
        return len(self.ell) == len(other.ell) and all(
            a % b == 0 for a, b in zip(self.ell, other.ell)
        )


class DecayFunction:
    """Symmetric kernel F: Z^d x Z^d -> (0,1] from a named family.

    family "exponential":  F(x,y) = exp(-kappa * |x-y|_2), kappa > 0
    family "polynomial":   F(x,y) = (1 + |x-y|_2)^(-power), power > 0

    Both satisfy F(x,x) = 1 and 0 < F <= 1.  The two summability constants
    are finite sums over a box (see `constants`); monotone in L.
    """

    FAMILIES = ("exponential", "polynomial")

    def __init__(self, family, **params):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown decay family {family!r}; use one of {self.FAMILIES}")
        self.family = family
        if family == "exponential":
            self.kappa = float(params.pop("kappa"))
            if self.kappa <= 0:
                raise ValueError("kappa must be > 0")
        else:
            self.power = float(params.pop("power"))
            if self.power <= 0:
                raise ValueError("power must be > 0")
        if params:
            raise ValueError(f"unexpected decay parameters: {sorted(params)}")
        self._cache = {}

    def __call__(self, x, y):
        r = math.dist(x, y)
        if self.family == "exponential":
            return math.exp(-self.kappa * r)
        return (1.0 + r) ** (-self.power)

    def describe(self):
        if self.family == "exponential":
            return f"exponential(kappa={self.kappa})"
        return f"polynomial(power={self.power})"

    def constants(self, box):
        """Box-restricted (normF1, constD).

        normF1 = max_y sum_x F(x,y); constD = max_{x,y} sum_z F(x,z)F(z,y)/F(x,y),
        all sums and maxima over the box sites.  Both are >= 1 since F(x,x) = 1.
        """
        key = (box.dimension, box.radius)
        if key not in self._cache:
            self._cache[key] = decay_constants(self, box)
        return self._cache[key]


def decay_constants(F, box):
    """Direct evaluation of the two decay constants on a box."""
    sites = box.sites
    n = len(sites)
    if n == 0:
        raise GeometryError("empty box")
    vals = [[F(x, y) for y in sites] for x in sites]
    norm_f1 = max(sum(vals[i][j] for i in range(n)) for j in range(n))
    const_d = max(
        sum(vals[i][k] * vals[k][j] for k in range(n)) / vals[i][j]
        for i in range(n)
        for j in range(n)
    )
    if not (math.isfinite(norm_f1) and math.isfinite(const_d)):
        raise OverflowError("decay constants overflowed")
    return norm_f1, const_d
