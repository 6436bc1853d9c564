"""Pure-numpy implementations of the hot kernels.

Same signatures and semantics as the compiled module; selected at import
time by :mod:`shiftpress._kernels` when the extension is missing or when
``SHIFTPRESS_PURE`` is set.
"""

import numpy as np

BACKEND = "fallback"


def power_iteration(mat, tol=1e-12, max_iter=1_000_000, shift=None, v0=None):
    """Dominant eigenpair of a nonnegative square matrix.

    Iterates ``v <- (M + shift*I) v`` with sup-norm normalization; the shift
    (default: half the largest row sum) keeps the iteration convergent for
    irreducible matrices with periodic support.  ``v0`` warm-starts the
    iteration.  Returns ``(lam, vec, residual, iters)`` where ``residual``
    is ``max|M v - lam v| / max(lam, 1)``.
    """
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    n = mat.shape[0]
    if shift is None:
        shift = 0.5 * float(mat.sum(axis=1).max())
    if v0 is not None and len(v0) == n and np.all(v0 >= 0) and v0.sum() > 0:
        v = np.asarray(v0, dtype=np.float64) / float(np.sum(v0))
    else:
        v = np.full(n, 1.0 / n)
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = mat @ v + shift * v
        top = w.max()
        if top <= 0.0:
            raise ZeroDivisionError("matrix has a zero row on the support reached")
        w /= top
        if it % 8 == 0 or it == max_iter:
            mv = mat @ w
            lam = float(w @ mv / (w @ w))
            res = float(np.abs(mv - lam * w).max() / max(lam, 1.0))
            if res <= tol:
                return lam, w / w.sum(), res, it
        v = w
    mv = mat @ v
    lam = float(v @ mv / (v @ v))
    res = float(np.abs(mv - lam * v).max() / max(lam, 1.0))
    return lam, v / v.sum(), res, max_iter


def count_blocks(symbols, m, depth, n):
    """Counts of the first ``n`` length-``depth`` windows of ``symbols``.

    Returns a dense int64 array of size ``m**depth`` indexed by the
    big-endian base-``m`` code of each window.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(depth):
        codes *= m
        codes += symbols[j : j + n]
    return np.bincount(codes, minlength=m**depth).astype(np.int64)


def birkhoff_sums(symbols, table, m, depth, positions):
    """Partial sums ``sum_{i<n} table[code(window_i)]`` at each ``n`` in positions.

    ``positions`` must be increasing; window ``n-1`` needs
    ``len(symbols) >= n + depth - 1``.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    n_max = int(positions[-1]) if len(positions) else 0
    codes = np.zeros(n_max, dtype=np.int64)
    for j in range(depth):
        codes *= m
        codes += symbols[j : j + n_max]
    csum = np.cumsum(np.asarray(table, dtype=np.float64)[codes])
    out = np.empty(len(positions), dtype=np.float64)
    for i, pos in enumerate(positions):
        out[i] = csum[pos - 1] if pos > 0 else 0.0
    return out


def sample_path(row_cumsum, start, length, uniforms):
    """Sample a Markov state path of ``length`` steps after ``start``.

    ``row_cumsum`` holds the cumulative transition probabilities per row;
    ``uniforms`` supplies one draw in [0,1) per step.  Returns the int64
    state sequence of size ``length`` (``start`` excluded).
    """
    row_cumsum = np.asarray(row_cumsum, dtype=np.float64)
    out = np.empty(length, dtype=np.int64)
    state = int(start)
    for t in range(length):
        state = int(np.searchsorted(row_cumsum[state], uniforms[t], side="right"))
        if state >= row_cumsum.shape[1]:
            state = row_cumsum.shape[1] - 1
        out[t] = state
    return out
