"""Dense/sparse realization of the CAR algebra on a finite box.

The Jordan-Wigner order is the global lexicographic mode order: mode
index = site_rank * n_spins + spin_rank, sites ranked lexicographically.
That makes every matrix in the package bit-reproducible.

Two operator layers:

* ``LocalOp`` - an abstract local operator: a dense matrix on the modes
  of its own (sorted) site tuple, box-independent.  Interaction templates,
  probe observables and cell states are LocalOps; they carry an exact
  algebra (sums/products land on the union site set) and translate by
  plain site relabeling.
* ``FockOperator`` - a sparse matrix on the full box Fock space, tagged
  with support and parity.  Built from LocalOps through the Majorana
  relabeling homomorphism (see `pauli`), which inserts the correct JW
  strings for any mode gaps.

Translations of FockOperators are partial: they require a local form and
the shifted support must stay inside the box (no periodic wrapping).
"""

from __future__ import annotations

import hashlib

import numpy as np
import scipy.sparse as sp

from . import pauli
from .errors import GeometryError, ResourceLimitError
from .linalg import frobenius, spectral_norm

#: dense-matrix operations (propagators, eigendecompositions) allowed up to here
DENSE_MODE_CAP = 14
#: expectation-only pure-vector paths allowed up to here
VECTOR_MODE_CAP = 20
#: union cap for the LocalOp algebra
LOCAL_MODE_CAP = 12

PARITY_TOL = 1e-10

SPINLESS = ("s",)
SPIN_HALF = ("up", "down")


def _local_parity_diag(n_modes):
    return np.where(pauli._popcount(np.arange(1 << n_modes)) % 2, -1.0, 1.0)


def _classify_parity(defect_even, defect_odd, tol):
    if defect_even <= tol:
        return "even"
    if defect_odd <= tol:
        return "odd"
    return "mixed"


class LocalOp:
    """Operator on the modes of a finite site tuple, box-independent."""

    __slots__ = ("sites", "spins", "matrix")

    def __init__(self, sites, spins, matrix):
        sites = tuple(tuple(s) for s in sites)
        if list(sites) != sorted(sites):
            raise ValueError("sites must be lexicographically sorted")
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate sites")
        self.sites = sites
        self.spins = tuple(spins)
        q = len(sites) * len(self.spins)
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (1 << q, 1 << q):
            raise ValueError(f"matrix shape {matrix.shape} != Fock dim for {q} modes")
        self.matrix = matrix

    @property
    def n_modes(self):
        return len(self.sites) * len(self.spins)

    def mode_position(self, site, spin):
        return self.sites.index(tuple(site)) * len(self.spins) + self.spins.index(spin)

    def embed_in(self, sites_super):
        """Same operator viewed on a superset of sites (JW-consistent)."""
        sites_super = tuple(tuple(s) for s in sites_super)
        if list(sites_super) != sorted(sites_super):
            raise ValueError("superset sites must be sorted")
        if not set(self.sites) <= set(sites_super):
            raise ValueError("sites not contained in superset")
        q_new = len(sites_super) * len(self.spins)
        if q_new > LOCAL_MODE_CAP:
            raise ResourceLimitError(
                f"local-operator algebra capped at {LOCAL_MODE_CAP} modes, need {q_new}"
            )
        ns = len(self.spins)
        mode_map = []
        for site in self.sites:
            base = sites_super.index(site) * ns
            mode_map.extend(base + j for j in range(ns))
        mat = pauli.embed_matrix_dense(self.matrix, self.n_modes, mode_map, q_new)
        return LocalOp(sites_super, self.spins, mat)

    def _binary(self, other, f):
        if not isinstance(other, LocalOp):
            return NotImplemented
        if self.spins != other.spins:
            raise ValueError("spin sets differ")
        union = tuple(sorted(set(self.sites) | set(other.sites)))
        a = self if self.sites == union else self.embed_in(union)
        b = other if other.sites == union else other.embed_in(union)
        return LocalOp(union, self.spins, f(a.matrix, b.matrix))

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __matmul__(self, other):
        return self._binary(other, lambda a, b: a @ b)

    def __mul__(self, c):
        return LocalOp(self.sites, self.spins, self.matrix * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def dagger(self):
        return LocalOp(self.sites, self.spins, self.matrix.conj().T)

    def translate(self, x):
        """Relabel every site by +x; the matrix is unchanged."""
        return LocalOp(
            tuple(tuple(c + dx for c, dx in zip(s, x)) for s in self.sites),
            self.spins,
            self.matrix,
        )

    def norm(self):
        if not np.any(self.matrix):
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def parity_image(self):
        d = _local_parity_diag(self.n_modes)
        return LocalOp(self.sites, self.spins, d[:, None] * self.matrix * d[None, :])

    def parity(self, tol=PARITY_TOL):
        sig = self.parity_image().matrix
        return _classify_parity(
            np.linalg.norm(sig - self.matrix), np.linalg.norm(sig + self.matrix), tol
        )

    def is_even(self, tol=PARITY_TOL):
        return self.parity(tol) == "even"

    def is_hermitian(self, tol=1e-12):
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol))

    def content_key(self):
        h = hashlib.blake2b(self.matrix.tobytes(), digest_size=16).hexdigest()
        return (self.sites, self.spins, self.matrix.shape[0], h)

    def __repr__(self):
        return f"LocalOp(sites={self.sites}, modes={self.n_modes})"


def local_annihilator(n_modes, j):
    """Annihilator of local mode j among n_modes modes (JW matrix).

    a_j = Z_{<j} (X_j + i Y_j)/2 = (1/2) X_j Z_{<j} - (1/2) X_j Z_j Z_{<j}.
    """
    low = (1 << j) - 1
    m = pauli.pauli_matrix_dense(n_modes, 1 << j, low, 0.5)
    m += pauli.pauli_matrix_dense(n_modes, 1 << j, low | (1 << j), -0.5)
    return m


def annihilator_local(site, spins, spin):
    """LocalOp a_{site,spin} on the site's own modes."""
    spins = tuple(spins)
    j = spins.index(spin)
    return LocalOp((tuple(site),), spins, local_annihilator(len(spins), j))


def creator_local(site, spins, spin):
    return annihilator_local(site, spins, spin).dagger()


def number_local(site, spins, spin):
    a = annihilator_local(site, spins, spin)
    return a.dagger() @ a


def identity_local(spins):
    """Unit element as a LocalOp with empty support."""
    return LocalOp((), spins, np.array([[1.0 + 0.0j]]))


class ModeSpace:
    """A box plus a spin label set; owns the JW operator cache."""

    def __init__(self, box, spins=SPINLESS):
        if isinstance(box, int):
            raise TypeError("pass a Box, not an int")
        self.box = box
        self.spins = tuple(spins)
        if not self.spins:
            raise ValueError("need at least one spin label")
        self.n_modes = len(box) * len(self.spins)
        if self.n_modes > VECTOR_MODE_CAP:
            raise ResourceLimitError(
                f"{self.n_modes} modes exceed the vector cap {VECTOR_MODE_CAP}"
            )
        self.dim = 1 << self.n_modes
        self._embed_cache = {}
        self._parity_diag = _local_parity_diag(self.n_modes)

    @property
    def dense_ok(self):
        return self.n_modes <= DENSE_MODE_CAP

    def require_dense(self):
        if not self.dense_ok:
            raise ResourceLimitError(
                f"dense-matrix operation on {self.n_modes} modes exceeds cap {DENSE_MODE_CAP}"
            )

    def mode_index(self, site, spin):
        return self.box.site_rank(site) * len(self.spins) + self.spins.index(spin)

    def key(self):
        return (self.box.dimension, self.box.radius, self.spins)

    # -- operator constructors -------------------------------------------------

    def embed(self, local_op):
        """FockOperator for a LocalOp, with JW strings across mode gaps."""
        if local_op.spins != self.spins:
            raise ValueError("spin sets differ")
        if not self.box.contains_set(local_op.sites):
            raise GeometryError(f"support {local_op.sites} leaves the box")
        key = local_op.content_key()
        hit = self._embed_cache.get(key)
        if hit is not None:
            mat = hit
        else:
            ns = len(self.spins)
            mode_map = []
            for site in local_op.sites:
                base = self.box.site_rank(site) * ns
                mode_map.extend(base + j for j in range(ns))
            mat = pauli.embed_matrix_csr(
                local_op.matrix, local_op.n_modes, mode_map, self.n_modes
            )
            if len(self._embed_cache) < 4096:
                self._embed_cache[key] = mat
        return FockOperator(self, mat, support=frozenset(local_op.sites), local_form=local_op)

    def identity(self):
        return self.embed(identity_local(self.spins))

    def annihilator(self, site, spin):
        return self.embed(annihilator_local(site, self.spins, spin))

    def creator(self, site, spin):
        return self.embed(creator_local(site, self.spins, spin))

    def number_op(self, site, spin):
        return self.embed(number_local(site, self.spins, spin))

    def parity_unitary_diag(self):
        """Diagonal of the global parity unitary P = prod (1 - 2 n_m)."""
        return self._parity_diag

    def vacuum_vector(self):
        v = np.zeros(self.dim, dtype=np.complex128)
        v[0] = 1.0
        return v

    def __repr__(self):
        return f"ModeSpace(d={self.box.dimension}, L={self.box.radius}, spins={self.spins})"


def _combine_parity_add(p1, p2):
    if p1 == p2:
        return p1
    return "mixed"


def _combine_parity_mul(p1, p2):
    if "mixed" in (p1, p2):
        return "mixed"
    return "even" if p1 == p2 else "odd"


class FockOperator:
    """Sparse operator on the box Fock space with support/parity tags."""

    __slots__ = ("space", "mat", "support", "parity", "local_form")

    def __init__(self, space, mat, support, parity=None, local_form=None):
        self.space = space
        self.mat = mat.tocsr() if sp.issparse(mat) else sp.csr_matrix(mat)
        self.support = frozenset(tuple(s) for s in support)
        self.local_form = local_form
        if parity is None:
            d = space.parity_unitary_diag()
            sig = sp.diags(d) @ self.mat @ sp.diags(d)
            parity = _classify_parity(
                frobenius(sig - self.mat), frobenius(sig + self.mat), PARITY_TOL
            )
        self.parity = parity

    # -- algebra ---------------------------------------------------------------

    def _check(self, other):
        if self.space is not other.space and self.space.key() != other.space.key():
            raise ValueError("operators live on different mode spaces")

    def _lf_binary(self, other, op):
        if self.local_form is None or other.local_form is None:
            return None
        union = set(self.local_form.sites) | set(other.local_form.sites)
        if len(union) * len(self.space.spins) > LOCAL_MODE_CAP:
            return None
        return op(self.local_form, other.local_form)

    def __add__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        self._check(other)
        return FockOperator(
            self.space,
            self.mat + other.mat,
            self.support | other.support,
            parity=_combine_parity_add(self.parity, other.parity),
            local_form=self._lf_binary(other, lambda a, b: a + b),
        )

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, c):
        return FockOperator(
            self.space,
            self.mat * c,
            self.support,
            parity=self.parity,
            local_form=None if self.local_form is None else self.local_form * c,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        self._check(other)
        return FockOperator(
            self.space,
            self.mat @ other.mat,
            self.support | other.support,
            parity=_combine_parity_mul(self.parity, other.parity),
            local_form=self._lf_binary(other, lambda a, b: a @ b),
        )

    def dagger(self):
        return FockOperator(
            self.space,
            self.mat.conj().T.tocsr(),
            self.support,
            parity=self.parity,
            local_form=None if self.local_form is None else self.local_form.dagger(),
        )

    # -- queries ---------------------------------------------------------------

    def norm(self):
        """Operator (spectral) norm; exact via the local form when present."""
        if self.local_form is not None:
            return self.local_form.norm()
        return spectral_norm(self.mat)

    def is_even(self, tol=PARITY_TOL):
        if tol >= PARITY_TOL:
            return self.parity == "even"
        d = self.space.parity_unitary_diag()
        sig = sp.diags(d) @ self.mat @ sp.diags(d)
        return frobenius(sig - self.mat) <= tol

    def is_hermitian(self, tol=1e-10):
        return frobenius(self.mat - self.mat.conj().T) <= tol

    def toarray(self):
        self.space.require_dense()
        return self.mat.toarray()

    def __repr__(self):
        sup = sorted(self.support)
        return f"FockOperator(modes={self.space.n_modes}, parity={self.parity}, support={sup})"


# -- spec operations ----------------------------------------------------------


def parity_map(a):
    """sigma(A) = P A P; the unique *-automorphism with sigma(a) = -a."""
    d = a.space.parity_unitary_diag()
    lf = None if a.local_form is None else a.local_form.parity_image()
    return FockOperator(
        a.space,
        sp.diags(d) @ a.mat @ sp.diags(d),
        a.support,
        parity=a.parity,
        local_form=lf,
    )


def is_even(a, tol=PARITY_TOL):
    return a.is_even(tol)


def translate_operator(a, x):
    """alpha_x(A): relabel every generator mode by +x.

    Requires a local form (template provenance); the shifted support must
    stay inside the box, otherwise GeometryError.
    """
    if a.local_form is None:
        raise GeometryError(
            "operator has no local form; translations are defined for "
            "template-built operators only"
        )
    shifted = a.local_form.translate(x)
    if not a.space.box.contains_set(shifted.sites):
        raise GeometryError(
            f"translated support {shifted.sites} leaves the box (radius {a.space.box.radius})"
        )
    return a.space.embed(shifted)
