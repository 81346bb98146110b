"""Hot numeric kernels: per-respondent projectors and the small symmetric eigensolve.

Each kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. :data:`USE_NUMBA` picks which one the public wrappers call. Set
``AMSCALE_DISABLE_NUMBA=1`` to force the numpy path; it is also used when numba
cannot be imported. Both are always importable so they can be benchmarked and
cross-checked against each other.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
_flag = os.environ.get("AMSCALE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")

# Rows per reduction block. Fixed so that A does not depend on worker count.
CHUNK = 2048


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

@_njit
def qr_block_nb(X, rank_tol, keep_rank1, A, ranks):
    """Add the Householder-QR projector of each row's [1, x] design into ``A``.

    ``ranks[i]`` receives 1 or 2. Rows are summed strictly in order; rank-1
    rows are skipped unless ``keep_rank1``.
    """
    n, J = X.shape
    col1 = np.empty(J)
    v = np.empty(J)
    w = np.empty(J)
    q = np.empty((J, 2))
    for i in range(n):
        norm0 = np.sqrt(float(J))
        xnorm = 0.0
        for r in range(J):
            col1[r] = X[i, r]
            xnorm += X[i, r] * X[i, r]
        xnorm = np.sqrt(xnorm)
        # reflector zeroing the ones column below row 0
        alpha = -norm0
        vn = 0.0
        for r in range(J):
            v[r] = 1.0
        v[0] -= alpha
        for r in range(J):
            vn += v[r] * v[r]
        vn = np.sqrt(vn)
        for r in range(J):
            v[r] /= vn
        s = 0.0
        for r in range(J):
            s += v[r] * col1[r]
        for r in range(J):
            col1[r] -= 2.0 * s * v[r]
        # reflector on rows 1.. of the second column
        t = 0.0
        for r in range(1, J):
            t += col1[r] * col1[r]
        t = np.sqrt(t)
        beta = -t if col1[1] >= 0.0 else t
        wn = 0.0
        for r in range(J):
            w[r] = col1[r] if r > 0 else 0.0
        w[1] -= beta
        for r in range(1, J):
            wn += w[r] * w[r]
        wn = np.sqrt(wn)
        # thin Q = H1 H2 [e0 e1]
        for r in range(J):
            q[r, 0] = 0.0
            q[r, 1] = 0.0
        q[0, 0] = 1.0
        q[1, 1] = 1.0
        if wn > 0.0:
            for r in range(1, J):
                w[r] /= wn
            for k in range(2):
                d = 0.0
                for r in range(1, J):
                    d += w[r] * q[r, k]
                for r in range(1, J):
                    q[r, k] -= 2.0 * d * w[r]
        for k in range(2):
            d = 0.0
            for r in range(J):
                d += v[r] * q[r, k]
            for r in range(J):
                q[r, k] -= 2.0 * d * v[r]
        scale = max(abs(alpha), xnorm)
        full = abs(beta) >= rank_tol * scale
        ranks[i] = 2 if full else 1
        if not full and not keep_rank1:
            continue
        for a in range(J):
            for b in range(J):
                pab = q[a, 0] * q[b, 0]
                if full:
                    pab += q[a, 1] * q[b, 1]
                A[a, b] += pab


@_njit
def naive_block_nb(X, A):
    """Add X_i (X_i'X_i)^-1 X_i' for every row (all rows must have rank 2)."""
    n, J = X.shape
    for i in range(n):
        sx = 0.0
        sxx = 0.0
        for r in range(J):
            sx += X[i, r]
            sxx += X[i, r] * X[i, r]
        det = J * sxx - sx * sx
        for a in range(J):
            xa = X[i, a]
            for b in range(J):
                xb = X[i, b]
                A[a, b] += (sxx - sx * (xa + xb) + J * xa * xb) / det


@_njit
def jacobi_eigh_nb(B, tol, max_sweeps):
    """Cyclic Jacobi eigensolver. Returns unsorted (values, vectors)."""
    m = B.shape[0]
    a = B.copy()
    V = np.eye(m)
    frob = 0.0
    for p in range(m):
        for q in range(m):
            frob += a[p, q] * a[p, q]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(m):
            for q in range(m):
                if p != q:
                    off += a[p, q] * a[p, q]
        if off <= tol * tol * frob or off == 0.0:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(m):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(m):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(m):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    vals = np.empty(m)
    for p in range(m):
        vals[p] = a[p, p]
    return vals, V


# --------------------------------------------------------------------------
# numpy kernels
# --------------------------------------------------------------------------

def qr_projectors_np(X, rank_tol):
    """Batched Householder thin QR of each row's [1, x] design.

    Returns (P, ranks) with P of shape (n, J, J).
    """
    X = np.asarray(X, dtype=float)
    n, J = X.shape
    col1 = X.copy()
    xnorm = np.sqrt(np.einsum("ij,ij->i", X, X))
    alpha = -np.sqrt(float(J))
    v = np.ones(J)
    v[0] -= alpha
    v /= np.sqrt(v @ v)
    col1 -= 2.0 * (col1 @ v)[:, None] * v[None, :]

    tail = col1[:, 1:]
    t = np.sqrt(np.einsum("ij,ij->i", tail, tail))
    beta = np.where(tail[:, 0] >= 0.0, -t, t)
    w = tail.copy()
    w[:, 0] -= beta
    wn = np.sqrt(np.einsum("ij,ij->i", w, w))
    live = wn > 0.0
    w[live] /= wn[live, None]
    w[~live] = 0.0

    q = np.zeros((n, J, 2))
    q[:, 0, 0] = 1.0
    q[:, 1, 1] = 1.0
    d = np.einsum("ir,irk->ik", w, q[:, 1:, :])
    q[:, 1:, :] -= 2.0 * w[:, :, None] * d[:, None, :]
    d = np.einsum("r,irk->ik", v, q)
    q -= 2.0 * v[None, :, None] * d[:, None, :]

    scale = np.maximum(abs(alpha), xnorm)
    full = np.abs(beta) >= rank_tol * scale
    q[~full, :, 1] = 0.0
    P = np.einsum("iak,ibk->iab", q, q)
    return P, np.where(full, 2, 1).astype(np.int64)


def naive_projectors_np(X):
    X = np.asarray(X, dtype=float)
    J = X.shape[1]
    sx = X.sum(axis=1)
    sxx = np.einsum("ij,ij->i", X, X)
    det = J * sxx - sx * sx
    xa = X[:, :, None]
    xb = X[:, None, :]
    num = sxx[:, None, None] - sx[:, None, None] * (xa + xb) + J * xa * xb
    return num / det[:, None, None]


def _sum_rows(P):
    A = np.zeros(P.shape[1:])
    for Pi in P:
        A += Pi
    return A


# --------------------------------------------------------------------------
# public wrappers
# --------------------------------------------------------------------------

def _blocks(n):
    return [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]


def _run_blocks(fn, n, threads):
    spans = _blocks(n)
    if threads <= 1 or len(spans) <= 1:
        return [fn(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda s: fn(*s), spans))


def qr_accumulate(X, rank_tol, keep_rank1=True, threads=1, use_numba=None):
    """Sum QR projectors over rows of ``X`` in fixed row order.

    Returns (A, ranks). Rank-1 rows are added as the projector onto the ones
    direction when ``keep_rank1`` is true and skipped otherwise.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, J = X.shape
    use_numba = USE_NUMBA if use_numba is None else use_numba

    def block(lo, hi):
        if use_numba:
            ranks = np.empty(hi - lo, dtype=np.int64)
            A = np.zeros((J, J))
            qr_block_nb(X[lo:hi], rank_tol, keep_rank1, A, ranks)
            return A, ranks
        P, ranks = qr_projectors_np(X[lo:hi], rank_tol)
        if not keep_rank1:
            P = P[ranks == 2]
        return _sum_rows(P), ranks

    parts = _run_blocks(block, n, threads)
    A = np.zeros((J, J))
    for Ab, _ in parts:
        A += Ab
    ranks = np.concatenate([r for _, r in parts]) if parts else np.empty(0, np.int64)
    return A, ranks


def naive_accumulate(X, threads=1, use_numba=None):
    """Sum the explicit-inverse projectors over rows of ``X`` (all rank 2)."""
    X = np.ascontiguousarray(X, dtype=float)
    n, J = X.shape
    use_numba = USE_NUMBA if use_numba is None else use_numba

    def block(lo, hi):
        if use_numba:
            A = np.zeros((J, J))
            naive_block_nb(X[lo:hi], A)
            return A
        return _sum_rows(naive_projectors_np(X[lo:hi]))

    A = np.zeros((J, J))
    for Ab in _run_blocks(block, n, threads):
        A += Ab
    return A


def symmetric_eigh(B, use_numba=None):
    """Eigenpairs of a small dense symmetric matrix, eigenvalues descending."""
    B = np.ascontiguousarray(B, dtype=float)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    if use_numba:
        vals, V = jacobi_eigh_nb(B, 1e-15, 100)
    else:
        vals, V = np.linalg.eigh(B)
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]
