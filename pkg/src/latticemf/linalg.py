"""Norm and matrix-exponential helpers shared by the dynamics modules.

Spectral norms are exact-dense below a size cutoff and deterministic
Lanczos (fixed ARPACK start vector) above it; `opnorm_upper` is the cheap
sqrt(norm1 * norminf) upper bound used where only "defect <= tol" matters.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_DENSE_HERM_CUTOFF = 1 << 10
_DENSE_GENERAL_CUTOFF = 1 << 9


def frobenius(a):
    if sp.issparse(a):
        return float(np.sqrt(abs(a.multiply(a.conj())).sum()))
    return float(np.linalg.norm(a))


def opnorm_upper(a):
    """sqrt(||A||_1 * ||A||_inf) >= spectral norm."""
    if sp.issparse(a):
        aa = abs(a)
        n1 = aa.sum(axis=0).max()
        ninf = aa.sum(axis=1).max()
    else:
        aa = np.abs(a)
        n1 = aa.sum(axis=0).max()
        ninf = aa.sum(axis=1).max()
    return float(np.sqrt(n1 * ninf))


def is_hermitian(a, tol=1e-12):
    if sp.issparse(a):
        d = a - a.conj().T
        return frobenius(d) <= tol * max(1.0, frobenius(a))
    return np.allclose(a, a.conj().T, atol=tol, rtol=tol)


def _arpack_v0(dim):
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def spectral_norm(a, hermitian=None):
    """Spectral (operator-2) norm of a dense or sparse matrix."""
    dim = a.shape[0]
    if sp.issparse(a):
        if a.nnz == 0:
            return 0.0
    elif not np.any(a):
        return 0.0
    if hermitian is None:
        hermitian = is_hermitian(a)
    if hermitian:
        if dim <= _DENSE_HERM_CUTOFF:
            dense = a.toarray() if sp.issparse(a) else np.asarray(a)
            w = np.linalg.eigvalsh(dense)
            return float(max(abs(w[0]), abs(w[-1])))
        w = spla.eigsh(
            a, k=1, which="LM", return_eigenvectors=False, v0=_arpack_v0(dim), tol=0
        )
        return float(abs(w[0]))
    if dim <= _DENSE_GENERAL_CUTOFF:
        dense = a.toarray() if sp.issparse(a) else np.asarray(a)
        return float(np.linalg.svd(dense, compute_uv=False)[0])
    op = spla.aslinearoperator(a)
    gram = spla.LinearOperator(
        (dim, dim),
        matvec=lambda v: op.rmatvec(op.matvec(v)),
        dtype=np.complex128,
    )
    w = spla.eigsh(
        gram, k=1, which="LA", return_eigenvectors=False, v0=_arpack_v0(dim), tol=0
    )
    return float(np.sqrt(max(w[0], 0.0)))


def norm_estimate(a, iters=30):
    """Fast power-iteration estimate of the spectral norm (lower bound)."""
    dim = a.shape[0]
    rng = np.random.default_rng(0xE57)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = a @ v
        if sp.issparse(a):
            w = np.asarray(w).ravel()
        w = a.conj().T @ w if not sp.issparse(a) else np.asarray(a.conj().T @ w).ravel()
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = np.sqrt(nw)
        v = w / nw
    return float(est)


def expi_hermitian(h_dense, scale):
    """exp(-1j * scale * H) for dense Hermitian H, via eigendecomposition."""
    w, v = np.linalg.eigh(h_dense)
    phases = np.exp(-1j * scale * w)
    return (v * phases) @ v.conj().T


def apply_expm(m, x, tol=1e-15, max_terms=60):
    """exp(M) @ X by Taylor action with scaling-and-squaring fallback.

    M is sparse (typically -1j*h*H with small norm); X a vector or dense
    matrix.  Intended for per-step propagator updates where ||M|| <~ 1.
    """
    norm_m = opnorm_upper(m)
    squarings = 0
    while norm_m > 1.0 and squarings < 40:
        m = m * 0.5
        norm_m *= 0.5
        squarings += 1
    for _ in range(1 << squarings):
        y = x.copy()
        term = x
        scale = max(np.linalg.norm(x), 1e-300)
        for k in range(1, max_terms + 1):
            term = (m @ term) / k
            y = y + term
            if np.linalg.norm(term) <= tol * scale:
                break
        x = y
    return x
