"""Seeded random interactions, models and observables for randomized checks."""

from __future__ import annotations

import numpy as np

from .fock import LocalOp, _local_parity_diag
from .interactions import Atom, Interaction, LongRangeModel


def random_even_localop(rng, sites, spins, hermitian=True, scale=1.0):
    """Random even LocalOp on the given sites (optionally self-adjoint)."""
    q = len(sites) * len(spins)
    dim = 1 << q
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    d = _local_parity_diag(q)
    m = 0.5 * (m + d[:, None] * m * d[None, :])
    if hermitian:
        m = 0.5 * (m + m.conj().T)
    nrm = np.linalg.norm(m, 2)
    if nrm > 0:
        m = m * (scale / nrm)
    return LocalOp(tuple(sorted(tuple(s) for s in sites)), spins, m)


def random_site_cluster(rng, d, max_extent, max_sites):
    """Random small site set containing the origin."""
    sites = {(0,) * d}
    n_extra = int(rng.integers(0, max_sites))
    for _ in range(n_extra):
        sites.add(tuple(int(rng.integers(-max_extent, max_extent + 1)) for _ in range(d)))
    return tuple(sorted(sites))


def random_ti_interaction(rng, spins, d=1, max_extent=1, max_sites=2, n_terms=2,
                          hermitian=True):
    """Random translation-invariant interaction with small-range terms."""
    terms = []
    seen = set()
    for _ in range(n_terms):
        sites = random_site_cluster(rng, d, max_extent, max_sites)
        if len(sites) * len(spins) > 6:
            sites = sites[:1]
        anchored = tuple(
            tuple(c - min(s[i] for s in sites) for i, c in enumerate(site))
            for site in sites
        )
        anchored = tuple(sorted(anchored))
        if anchored in seen:
            continue
        seen.add(anchored)
        terms.append(random_even_localop(rng, anchored, spins, hermitian=hermitian,
                                         scale=float(rng.uniform(0.2, 1.5))))
    if not terms:
        terms.append(random_even_localop(rng, ((0,) * d,), spins, hermitian=hermitian))
    return Interaction(terms, True, spins)


def normalized_factor(rng, spins, F, box, d=1):
    """Random TI interaction scaled to unit box-restricted W-norm.

    Term extent is capped by the box radius so the norm is never zero.
    """
    ext = min(1, box.radius)
    psi = random_ti_interaction(rng, spins, d=d, max_extent=ext, max_sites=2,
                                n_terms=1, hermitian=False)
    wn = psi.w_norm(F, box)
    return psi * (1.0 / wn)


def random_model(rng, spins, F, box, d=1, max_order=2, n_atoms=1, hermitian_phi=True):
    """Random self-adjoint long-range model with reversal-closed atoms.

    Interaction ranges are capped by the box radius so that box-restricted
    norms, local energies and energy densities are mutually consistent.
    """
    ext = min(1, box.radius)
    phi = random_ti_interaction(rng, spins, d=d, max_extent=ext, hermitian=True,
                                n_terms=2)
    if hermitian_phi:
        phi = 0.5 * (phi + phi.involution())
    atoms = []
    for _ in range(n_atoms):
        n = int(rng.integers(1, max_order + 1))
        factors = tuple(normalized_factor(rng, spins, F, box, d) for _ in range(n))
        w = float(rng.uniform(-1.0, 1.0))
        atoms.append(Atom(w, factors))
        atoms.append(Atom(w, tuple(f.involution() for f in reversed(factors))))
    return LongRangeModel(phi, tuple(atoms))


def random_local_observable(rng, box, spins, max_sites=2, hermitian=False):
    """Random local operator supported near the origin of the box."""
    L = box.radius
    d = box.dimension
    reach = min(L, 1)
    sites = {(0,) * d}
    for _ in range(int(rng.integers(0, max_sites))):
        sites.add(tuple(int(rng.integers(-reach, reach + 1)) for _ in range(d)))
    sites = tuple(sorted(sites))
    q = len(sites) * len(spins)
    dim = 1 << q
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    if hermitian:
        m = 0.5 * (m + m.conj().T)
    m = m / max(np.linalg.norm(m, 2), 1e-12)
    return LocalOp(sites, spins, m)
