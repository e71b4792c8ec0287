"""Signed-Pauli bit algebra backing the Jordan-Wigner representation.

Every operator in the package is a complex combination of terms
X^x Z^z (x, z mode bitmasks), with matrix elements

    <r| X^x Z^z |c> = (-1)^popcount(c & z) * delta(r, c ^ x).

Mode m corresponds to bit m (mode 0 = least significant); basis state
|b> has mode m occupied iff bit m of b is set, and index 0 is the vacuum.
Majorana generators in this convention:

    mu(2m)   =      X_m Z_{<m}        -> term(x=1<<m, z=lowbits(m),          1)
    mu(2m+1) = i *  X_m Z_m Z_{<m}    -> term(x=1<<m, z=lowbits(m) | 1<<m,   i)

Products of Majoranas taken in increasing index order are again single
signed Pauli terms, which makes the unique *-homomorphism determined by
a relabeling of modes (local operator -> operator on a larger mode set)
a purely symbolic computation followed by one sparse materialization per
distinct Pauli string.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

_popcount_table = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)


def _popcount(arr):
    arr = np.asarray(arr, dtype=np.uint64)
    out = _popcount_table[arr & np.uint64(0xFFFF)]
    out += _popcount_table[(arr >> np.uint64(16)) & np.uint64(0xFFFF)]
    out += _popcount_table[(arr >> np.uint64(32)) & np.uint64(0xFFFF)]
    out += _popcount_table[(arr >> np.uint64(48)) & np.uint64(0xFFFF)]
    return out


def pauli_mul(t1, t2):
    """Product of signed Pauli terms (x1,z1,c1)*(x2,z2,c2).

    (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^popcount(z1 & x2) X^(x1^x2) Z^(z1^z2).
    """
    x1, z1, c1 = t1
    x2, z2, c2 = t2
    sign = -1.0 if bin(z1 & x2).count("1") % 2 else 1.0
    return (x1 ^ x2, z1 ^ z2, c1 * c2 * sign)


def pauli_dagger(t):
    """(X^x Z^z)† = (-1)^popcount(x&z) X^x Z^z; conjugate the coefficient."""
    x, z, c = t
    sign = -1.0 if bin(x & z).count("1") % 2 else 1.0
    return (x, z, np.conj(c) * sign)


def majorana_term(index):
    """Symbolic Majorana generator mu(index), index = 2*mode (+1)."""
    mode, odd = divmod(index, 2)
    low = (1 << mode) - 1
    if odd:
        return (1 << mode, low | (1 << mode), 1j)
    return (1 << mode, low, 1.0)


def pauli_matrix_dense(n_modes, x, z, coeff):
    """Dense matrix of coeff * X^x Z^z on n_modes modes."""
    dim = 1 << n_modes
    cols = np.arange(dim)
    rows = cols ^ x
    data = coeff * np.where(_popcount(cols & z) % 2, -1.0, 1.0).astype(np.complex128)
    mat = np.zeros((dim, dim), dtype=np.complex128)
    mat[rows, cols] = data
    return mat


def paulis_to_csr(n_modes, terms):
    """Sparse matrix of sum coeff * X^x Z^z.  Terms may share (x, z)."""
    dim = 1 << n_modes
    if not terms:
        return sp.csr_matrix((dim, dim), dtype=np.complex128)
    merged = {}
    for x, z, c in terms:
        key = (x, z)
        merged[key] = merged.get(key, 0.0) + c
    cols = np.arange(dim)
    rows_all = []
    cols_all = []
    data_all = []
    for (x, z), c in merged.items():
        if c == 0.0:
            continue
        signs = np.where(_popcount(cols & z) % 2, -1.0, 1.0)
        rows_all.append(cols ^ x)
        cols_all.append(cols)
        data_all.append(c * signs)
    if not rows_all:
        return sp.csr_matrix((dim, dim), dtype=np.complex128)
    mat = sp.coo_matrix(
        (np.concatenate(data_all), (np.concatenate(rows_all), np.concatenate(cols_all))),
        shape=(dim, dim),
        dtype=np.complex128,
    )
    return mat.tocsr()


def pauli_decompose(matrix, n_modes, tol=0.0):
    """Coefficients {(x, z): c} with matrix = sum c * X^x Z^z.

    Uses tr((X^x Z^z)† M) / 2^n per term; exact for any complex matrix.
    """
    dim = 1 << n_modes
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (dim, dim):
        raise ValueError(f"matrix shape {matrix.shape} != ({dim},{dim})")
    cols = np.arange(dim)
    out = {}
    for x in range(dim):
        rows = cols ^ x
        diag_vals = matrix[rows, cols]
        if not np.any(diag_vals):
            continue
        for z in range(dim):
            signs = np.where(_popcount(cols & z) % 2, -1.0, 1.0)
            c = np.dot(signs, diag_vals) / dim
            if abs(c) > tol:
                out[(x, z)] = c
    return out


@lru_cache(maxsize=32)
def _majorana_monomial_table(n_modes):
    """Map (x, z) -> (majorana index tuple, coeff) on n_modes modes.

    Enumerates all 4^n ordered Majorana monomials symbolically; the map
    Pauli term <-> monomial is a bijection.  coeff is the phase with
    prod_{i in S, increasing} mu(i) = coeff * X^x Z^z.
    """
    table = {(0, 0): ((), 1.0)}
    frontier = {(): (0, 0, 1.0)}
    for idx in range(2 * n_modes):
        mu = majorana_term(idx)
        additions = {}
        for subset, term in frontier.items():
            new = pauli_mul(term, mu)
            additions[subset + (idx,)] = new
        frontier.update(additions)
    for subset, (x, z, c) in frontier.items():
        table[(x, z)] = (subset, c)
    return table


def relabel_terms(matrix, n_local, mode_map):
    """Symbolic image of a local matrix under the CAR mode relabeling.

    `mode_map[j]` is the global mode index of local mode j and must be
    strictly increasing.  Returns a list of global (x, z, coeff) terms for
    the unique *-homomorphism sending local mu(2j+b) to global
    mu(2*mode_map[j]+b).
    """
    if list(mode_map) != sorted(mode_map):
        raise ValueError("mode_map must be strictly increasing")
    local = pauli_decompose(matrix, n_local)
    table = _majorana_monomial_table(n_local)
    out = []
    for (x, z), c in local.items():
        subset, phase = table[(x, z)]
        term = (0, 0, c / phase)
        for idx in subset:
            mode, odd = divmod(idx, 2)
            term = pauli_mul(term, majorana_term(2 * mode_map[mode] + odd))
        out.append(term)
    return out


def embed_matrix_dense(matrix, n_local, mode_map, n_total):
    """Dense image of `relabel_terms` on n_total modes."""
    terms = relabel_terms(matrix, n_local, mode_map)
    dim = 1 << n_total
    out = np.zeros((dim, dim), dtype=np.complex128)
    for x, z, c in terms:
        out += pauli_matrix_dense(n_total, x, z, c)
    return out


def embed_matrix_csr(matrix, n_local, mode_map, n_total):
    """Sparse image of `relabel_terms` on n_total modes."""
    return paulis_to_csr(n_total, relabel_terms(matrix, n_local, mode_map))


def fermionic_marginal(matrix, n_modes, keep_positions):
    """Reduced matrix on a mode subset, in the CAR (not qubit) sense.

    Defined by tr(rho_red A) = tr(rho iota(A)) for every A on the kept
    modes, iota the CAR embedding.  Expanding rho over Majorana monomials,
    exactly the monomials supported on kept modes survive, rescaled by
    2^(q - |K|); they are re-indexed onto the kept-mode positions in order.
    For a contiguous low block this coincides with the qubit partial trace.
    """
    keep = tuple(sorted(keep_positions))
    if keep != tuple(keep_positions):
        raise ValueError("keep_positions must be sorted")
    pos_of = {m: i for i, m in enumerate(keep)}
    q_red = len(keep)
    table = _majorana_monomial_table(n_modes)
    terms = pauli_decompose(matrix, n_modes)
    scale = float(1 << (n_modes - q_red))
    out = np.zeros((1 << q_red, 1 << q_red), dtype=np.complex128)
    for (x, z), c in terms.items():
        subset, phase = table[(x, z)]
        modes = {idx // 2 for idx in subset}
        if not modes <= set(keep):
            continue
        term = (0, 0, c / phase * scale)
        for idx in subset:
            mode, odd = divmod(idx, 2)
            term = pauli_mul(term, majorana_term(2 * pos_of[mode] + odd))
        out += pauli_matrix_dense(q_red, term[0], term[1], term[2])
    return out
