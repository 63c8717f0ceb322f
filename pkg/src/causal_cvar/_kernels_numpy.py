"""Vectorised numpy kernels (fallback backend).

Every function here has a loop-based twin in ``_kernels_numba`` with the same
signature and the same results up to floating-point summation order.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def greedy_fill(coef, cap, total, descending):
    """Fractional-knapsack fill, batched over rows.

    Pours ``total[i]`` units into the slots of row ``i`` in order of
    ``coef`` (largest first when ``descending``), saturating each slot's
    ``cap`` before moving on. Ties go to the lower column index.
    """
    key = -coef if descending else coef
    order = np.argsort(key, axis=1, kind="stable")
    cap_s = np.take_along_axis(cap, order, axis=1)
    before = np.cumsum(cap_s, axis=1) - cap_s
    fill_s = np.clip(total[:, None] - before, 0.0, cap_s)
    fill = np.empty_like(fill_s)
    np.put_along_axis(fill, order, fill_s, axis=1)
    return fill


def cvar_tail_batch(P, y, alpha):
    """Lower-tail CVaR of each row distribution ``P[i]`` over levels ``y``."""
    cum = np.minimum(np.cumsum(P, axis=1), alpha)
    prev = np.concatenate([np.zeros((P.shape[0], 1)), cum[:, :-1]], axis=1)
    return (np.maximum(cum - prev, 0.0) @ y) / alpha


def do_ratio_eval(pc, pxy, alo, b, maximize):
    """Exact inner optimum of sum_c P(c) a_c / b_c for each row of ``b``."""
    pos = b > 0
    coef = np.where(pos, pc[None, :] / np.where(pos, b, 1.0), 0.0)
    cap = np.where(pos, np.minimum(pxy, b), 0.0)
    base_lo = np.where(pos, alo[None, :], 0.0)
    rem = pxy - base_lo.sum(axis=1)
    fill = greedy_fill(coef, np.maximum(cap - base_lo, 0.0), rem, maximize)
    return ((base_lo + fill) * coef).sum(axis=1)


def do_grid_extreme(pc, px, pxy, alo, blo, bhi, step, maximize):
    """Exhaustive grid over the b-slice ``{blo <= b <= bhi, sum b = px}``.

    The first ``C-1`` coordinates run over grids that include both box
    endpoints with spacing at most ``step``; the last is determined by the
    sum. Returns ``(best value, best b, number of feasible points)``.
    """
    C = pc.size
    if C == 1:
        b = np.array([[px]])
        v = do_ratio_eval(pc, pxy, alo, b, maximize)
        return float(v[0]), b[0].copy(), 1
    axes = []
    for c in range(C - 1):
        n = max(int(np.ceil((bhi[c] - blo[c]) / step - 1e-9)), 0) + 1
        axes.append(np.linspace(blo[c], bhi[c], n) if n > 1 else np.array([blo[c]]))
    best = -np.inf if maximize else np.inf
    best_b = None
    count = 0
    # outer coordinates enumerated, innermost vectorised
    outer = np.stack(np.meshgrid(*axes[:-1], indexing="ij"), axis=-1).reshape(-1, C - 2) if C > 2 else np.zeros((1, 0))
    inner = axes[-1]
    tol = 1e-12
    for head in outer:
        rest = px - head.sum() - inner
        ok = (rest >= blo[-1] - tol) & (rest <= bhi[-1] + tol)
        if not ok.any():
            continue
        m = int(ok.sum())
        b = np.empty((m, C))
        b[:, : C - 2] = head
        b[:, C - 2] = inner[ok]
        b[:, C - 1] = np.clip(rest[ok], blo[-1], bhi[-1])
        v = do_ratio_eval(pc, pxy, alo, b, maximize)
        count += m
        i = int(np.argmax(v)) if maximize else int(np.argmin(v))
        if (maximize and v[i] > best) or (not maximize and v[i] < best):
            best, best_b = float(v[i]), b[i].copy()
    return best, best_b, count


def _axis(lo, hi, step):
    n = max(int(np.ceil((hi - lo) / step - 1e-9)), 0) + 1
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def cvar_grid_extremes(lo, hi, y, alpha, step, free):
    """Min and max CVaR over a grid of the box-simplex slice.

    Every coordinate except ``free`` runs over a grid that includes both
    interval endpoints; ``p[free]`` is fixed by the unit-sum constraint.
    Returns ``(min, max, number of points)``.
    """
    m = y.size
    if m == 1:
        v = float(y[0])
        return v, v, 1
    coords = [i for i in range(m) if i != free]
    axes = [_axis(lo[i], hi[i], step) for i in coords]
    outer = np.stack(np.meshgrid(*axes[:-1], indexing="ij"), axis=-1).reshape(-1, m - 2) if m > 2 else np.zeros((1, 0))
    inner = axes[-1]
    vmin, vmax, count = np.inf, -np.inf, 0
    tol = 1e-12
    for head in outer:
        last = 1.0 - head.sum() - inner
        ok = (last >= lo[free] - tol) & (last <= hi[free] + tol)
        if not ok.any():
            continue
        k = int(ok.sum())
        P = np.empty((k, m))
        P[:, coords[:-1]] = head
        P[:, coords[-1]] = inner[ok]
        P[:, free] = np.clip(last[ok], 0.0, None)
        v = cvar_tail_batch(P, y, alpha)
        vmin = min(vmin, float(v.min()))
        vmax = max(vmax, float(v.max()))
        count += k
    return vmin, vmax, count


def optimistic_cvar_batch(counts, totals, eps, y, upper, alpha):
    """CVaR of each arm's DKW-shifted empirical CDF.

    ``counts`` is ``(K, L)``; the shifted CDF is ``max(F - eps, 0)`` on
    ``[0, U)`` and 1 at ``U``, so any removed mass lands on ``U``.
    """
    F = np.cumsum(counts, axis=1) / totals[:, None]
    below = y < upper
    Ft = np.where(below[None, :], np.maximum(F - eps[:, None], 0.0), 1.0)
    cum = np.minimum(Ft, alpha)
    prev = np.concatenate([np.zeros((cum.shape[0], 1)), cum[:, :-1]], axis=1)
    val = (np.maximum(cum - prev, 0.0) @ y)
    val = val + upper * (alpha - cum[:, -1])
    return val / alpha


def run_bandit(level_cdf, y, upper, alpha, horizon, kept, clip, policy, uniforms):
    """Single bandit episode.

    ``level_cdf[x]`` is the interventional CDF of arm ``x`` on the levels,
    ``kept`` the arms surviving pruning (ascending), ``clip`` the per-arm
    upper clip (``inf`` for none) and ``policy`` 0 for CVaR-UCB, 1 for
    UCB1. Returns ``(arms, levels, index_matrix)``; the index matrix holds
    the index of every arm at each post-initialisation step (NaN for arms
    not in play).
    """
    K, L = level_cdf.shape
    arms = np.empty(horizon, dtype=np.int64)
    levels = np.empty(horizon, dtype=np.int64)
    n_init = kept.size
    n_loop = max(horizon - n_init, 0)
    index = np.full((n_loop, K), np.nan)
    counts = np.zeros((K, L), dtype=np.int64)
    T = np.zeros(K, dtype=np.int64)
    log_term = np.log(2.0 * float(horizon) ** 2)
    t = 0
    for x in kept[: min(n_init, horizon)]:
        j = int(np.searchsorted(level_cdf[x], uniforms[t], side="right"))
        j = min(j, L - 1)
        arms[t], levels[t] = x, j
        counts[x, j] += 1
        T[x] += 1
        t += 1
    for s in range(n_loop):
        Tk = T[kept].astype(np.float64)
        if policy == 0:
            eps = np.sqrt(log_term / (2.0 * Tk))
            vals = optimistic_cvar_batch(counts[kept], Tk, eps, y, upper, alpha)
            vals = np.minimum(vals, clip[kept])
        else:
            means = (counts[kept] @ y) / Tk
            vals = means + np.sqrt(2.0 * np.log(float(t)) / Tk)
        index[s, kept] = vals
        x = int(kept[int(np.argmax(vals))])
        j = int(np.searchsorted(level_cdf[x], uniforms[t], side="right"))
        j = min(j, L - 1)
        arms[t], levels[t] = x, j
        counts[x, j] += 1
        T[x] += 1
        t += 1
    return arms, levels, index


def compensated_cumsum(x):
    """Running sum with Neumaier compensation."""
    out = np.empty(x.size)
    s = 0.0
    comp = 0.0
    for i, v in enumerate(x.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out
