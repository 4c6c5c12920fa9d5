"""Thomas-algorithm kernels for the Crank-Nicolson march."""

import numpy as np
from numba import njit

PIVOT_RTOL = 1e-14


@njit(cache=True, nogil=True)
def factor_tridiag(lower, diag, upper):
    """
    Forward-elimination factors of a tridiagonal matrix.

    Parameters
    ----------
    lower : ndarray
        Sub-diagonal as a length n array (lower[0] unused).
    diag : ndarray
        Main diagonal, length n.
    upper : ndarray
        Super-diagonal as a length n array (upper[-1] unused).

    Returns
    -------
    pivots : ndarray
        Modified diagonal after elimination.
    mults : ndarray
        Elimination multipliers (mults[0] = 0).
    bad_row : int
        Index of the first row with a pivot below ``PIVOT_RTOL`` times the
        row max, or -1 if every pivot is usable.
    """
    n = diag.shape[0]
    pivots = np.empty(n)
    mults = np.zeros(n)
    pivots[0] = diag[0]
    bad_row = -1
    scale = abs(diag[0])
    if n > 1:
        scale = max(scale, abs(upper[0]))
    if abs(pivots[0]) <= PIVOT_RTOL * scale:
        return pivots, mults, 0
    for k in range(1, n):
        m = lower[k] / pivots[k - 1]
        mults[k] = m
        pivots[k] = diag[k] - m * upper[k - 1]
        scale = max(abs(lower[k]), abs(diag[k]))
        if k < n - 1:
            scale = max(scale, abs(upper[k]))
        if abs(pivots[k]) <= PIVOT_RTOL * scale:
            bad_row = k
            break
    return pivots, mults, bad_row


@njit(cache=True, nogil=True)
def substitute(pivots, mults, upper, rhs, out):
    """Solve with precomputed factors; ``rhs`` is left untouched."""
    n = rhs.shape[0]
    out[0] = rhs[0]
    for k in range(1, n):
        out[k] = rhs[k] - mults[k] * out[k - 1]
    out[n - 1] = out[n - 1] / pivots[n - 1]
    for k in range(n - 2, -1, -1):
        out[k] = (out[k] - upper[k] * out[k + 1]) / pivots[k]


@njit(cache=True, nogil=True)
def cn_march(a_lower, a_diag, a_upper, b_lower, b_diag, b_upper, u0, left, right):
    """
    March the scheme ``A u_next = B u_now + boundary`` over all time levels.

    ``left`` and ``right`` hold the Dirichlet values at every time level
    (length n_tau + 1). Returns the surface with shape (n_tau + 1, n_y),
    one row per time level, and the time index of a failed solve (-1 if
    none).
    """
    n_y = u0.shape[0]
    n = n_y - 2
    n_levels = left.shape[0]
    values = np.empty((n_levels, n_y))
    values[0] = u0
    values[0, 0] = left[0]
    values[0, n_y - 1] = right[0]

    pivots, mults, bad = factor_tridiag(a_lower, a_diag, a_upper)
    if bad >= 0:
        return values, 1

    inv_piv = 1.0 / pivots
    for j in range(n_levels - 1):
        cur = values[j]
        nxt = values[j + 1]
        # Dirichlet data enters only the first and last interior rows
        rhs0 = b_lower[0] * left[j] - a_lower[0] * left[j + 1]
        rhsn = b_upper[n - 1] * right[j] - a_upper[n - 1] * right[j + 1]
        # forward sweep fused with the explicit-side product
        prev = 0.0
        for i in range(n):
            acc = b_lower[i] * cur[i] + b_diag[i] * cur[i + 1] + b_upper[i] * cur[i + 2]
            if i == 0:
                acc += rhs0 - b_lower[0] * cur[0]
            if i == n - 1:
                acc += rhsn - b_upper[n - 1] * cur[n_y - 1]
            prev = acc - mults[i] * prev
            nxt[i + 1] = prev
        nxt[n] = nxt[n] * inv_piv[n - 1]
        for i in range(n - 2, -1, -1):
            nxt[i + 1] = (nxt[i + 1] - a_upper[i] * nxt[i + 2]) * inv_piv[i]
        nxt[0] = left[j + 1]
        nxt[n_y - 1] = right[j + 1]
    return values, -1
