"""Pure-Python (numpy) implementation of the scaling kernels.

``feature_moments`` groups model mass by the total feature count of each
parse; ``solve_increments`` then solves, for every feature ``i``,

    sum_l M[i, l] * exp(d * k_l) + (w_i + d) * inv_var = target_i

for ``d`` with Newton's method inside a bisection bracket.  The compiled
module ``_ckernels`` implements the same contract element by element.
"""

import numpy as np

OK = 0
FROZEN = 1
UNCONVERGED = 2

MAX_EXP = 700.0
BRACKET_LIMIT = 64.0
BISECT_STEPS = 200


def feature_moments(indptr, indices, data, row_level, probs, n_features, n_levels):
    nnz_rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    flat = indices * n_levels + row_level[nnz_rows]
    out = np.bincount(flat, weights=probs[nnz_rows] * data, minlength=n_features * n_levels)
    return out.reshape(n_features, n_levels)


def _g(moments, levels, target, base, inv_var, d):
    e = np.exp(np.minimum(np.outer(d, levels), MAX_EXP))
    me = moments * e
    g = me.sum(axis=1) + (base + d) * inv_var - target
    dg = (me * levels).sum(axis=1) + inv_var
    return g, dg


def solve_increments(moments, levels, target, weights, inv_var, tol, max_steps, floor,
                     num_threads=1):
    """Return ``(increments, flags)``; ``num_threads`` is accepted for parity and ignored."""
    moments = np.asarray(moments, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    base = np.asarray(weights, dtype=np.float64)
    n = len(target)
    flags = np.zeros(n, dtype=np.int8)
    delta = np.zeros(n)
    if n == 0:
        return delta, flags

    frozen = (target <= 0.0) & (inv_var == 0.0)
    flags[frozen] = FROZEN
    delta[frozen] = floor - base[frozen]
    active = ~frozen
    if not active.any():
        return delta, flags
    idx = np.flatnonzero(active)
    M, t, b = moments[idx], target[idx], base[idx]

    def g_of(d):
        return _g(M, levels, t, b, inv_var, d)

    # expand [lo, hi] until g(lo) <= 0 <= g(hi)
    lo = np.full(len(idx), -1.0)
    hi = np.full(len(idx), 1.0)
    glo, _ = g_of(lo)
    ghi, _ = g_of(hi)
    while True:
        grow_lo = (glo > 0) & (lo > -BRACKET_LIMIT)
        grow_hi = (ghi < 0) & (hi < BRACKET_LIMIT)
        if not (grow_lo.any() or grow_hi.any()):
            break
        lo = np.where(grow_lo, lo * 2, lo)
        hi = np.where(grow_hi, hi * 2, hi)
        glo, _ = g_of(lo)
        ghi, _ = g_of(hi)
    unbracketed = (glo > 0) | (ghi < 0)

    d = np.clip(np.zeros(len(idx)), lo, hi)
    done = unbracketed.copy()
    result = np.where(glo > 0, lo, np.where(ghi < 0, hi, 0.0))
    for _ in range(max_steps):
        if done.all():
            break
        g, dg = g_of(d)
        hit = (g == 0.0) & ~done
        result[hit] = d[hit]
        done |= hit
        lo = np.where(~done & (g < 0), d, lo)
        hi = np.where(~done & (g > 0), d, hi)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            step = g / dg
            new = d - step
        inside = np.isfinite(new) & (new > lo) & (new < hi)
        new = np.where(inside, new, 0.5 * (lo + hi))
        conv = ~done & ((np.abs(new - d) < tol) | (hi - lo < tol))
        result[conv] = new[conv]
        done |= conv
        d = np.where(done, d, new)

    stuck = ~done
    if stuck.any():
        # bisection on the remaining bracket
        for _ in range(BISECT_STEPS):
            live = stuck & (hi - lo >= tol)
            if not live.any():
                break
            mid = 0.5 * (lo + hi)
            g, _ = g_of(mid)
            lo = np.where(live & (g < 0), mid, lo)
            hi = np.where(live & (g >= 0), mid, hi)
        result[stuck] = 0.5 * (lo + hi)[stuck]

    sub_flags = np.where(stuck | unbracketed, UNCONVERGED, OK).astype(np.int8)
    delta[idx] = result
    flags[idx] = sub_flags
    return delta, flags
