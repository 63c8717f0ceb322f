"""Loop kernels compiled with numba; same contracts as ``_kernels_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def _fill_row(coef, cap, total, descending, order, out):
    C = coef.size
    for i in range(C):
        order[i] = i
    # stable insertion sort; C is tiny
    for i in range(1, C):
        k = order[i]
        j = i - 1
        while j >= 0:
            o = order[j]
            if descending:
                move = coef[o] < coef[k]
            else:
                move = coef[o] > coef[k]
            if not move:
                break
            order[j + 1] = o
            j -= 1
        order[j + 1] = k
    rem = total
    for i in range(C):
        c = order[i]
        f = cap[c] if cap[c] < rem else rem
        if f < 0.0:
            f = 0.0
        out[c] = f
        rem -= f


@njit(cache=True)
def greedy_fill(coef, cap, total, descending):
    N, C = coef.shape
    out = np.zeros((N, C))
    order = np.empty(C, dtype=np.int64)
    for n in range(N):
        _fill_row(coef[n], cap[n], total[n], descending, order, out[n])
    return out


@njit(cache=True)
def cvar_tail_batch(P, y, alpha):
    N, L = P.shape
    out = np.empty(N)
    for n in range(N):
        cum = 0.0
        prev = 0.0
        acc = 0.0
        for j in range(L):
            cum += P[n, j]
            c = cum if cum < alpha else alpha
            d = c - prev
            if d > 0.0:
                acc += d * y[j]
            prev = c
        out[n] = acc / alpha
    return out


@njit(cache=True)
def _ratio_value(pc, pxy, alo, b, maximize, coef, cap, order, fill):
    C = pc.size
    rem = pxy
    for c in range(C):
        if b[c] > 0.0:
            coef[c] = pc[c] / b[c]
            hi = pxy if pxy < b[c] else b[c]
            cap[c] = hi - alo[c] if hi > alo[c] else 0.0
            rem -= alo[c]
        else:
            coef[c] = 0.0
            cap[c] = 0.0
    _fill_row(coef, cap, rem, maximize, order, fill)
    v = 0.0
    for c in range(C):
        if b[c] > 0.0:
            v += (alo[c] + fill[c]) * coef[c]
    return v


@njit(cache=True)
def do_ratio_eval(pc, pxy, alo, b, maximize):
    N, C = b.shape
    out = np.empty(N)
    coef = np.empty(C)
    cap = np.empty(C)
    fill = np.empty(C)
    order = np.empty(C, dtype=np.int64)
    for n in range(N):
        out[n] = _ratio_value(pc, pxy, alo, b[n], maximize, coef, cap, order, fill)
    return out


@njit(cache=True)
def _n_points(lo, hi, step):
    n = int(np.ceil((hi - lo) / step - 1e-9))
    if n < 0:
        n = 0
    return n + 1


@njit(cache=True)
def do_grid_extreme(pc, px, pxy, alo, blo, bhi, step, maximize):
    C = pc.size
    b = np.empty(C)
    best_b = np.empty(C)
    coef = np.empty(C)
    cap = np.empty(C)
    fill = np.empty(C)
    order = np.empty(C, dtype=np.int64)
    if C == 1:
        b[0] = px
        return _ratio_value(pc, pxy, alo, b, maximize, coef, cap, order, fill), b, 1
    npts = np.empty(C - 1, dtype=np.int64)
    for c in range(C - 1):
        npts[c] = _n_points(blo[c], bhi[c], step)
    idx = np.zeros(C - 1, dtype=np.int64)
    best = -np.inf if maximize else np.inf
    count = 0
    tol = 1e-12
    while True:
        s = 0.0
        for c in range(C - 1):
            if npts[c] > 1:
                b[c] = blo[c] + (bhi[c] - blo[c]) * idx[c] / (npts[c] - 1)
            else:
                b[c] = blo[c]
            s += b[c]
        last = px - s
        if last >= blo[C - 1] - tol and last <= bhi[C - 1] + tol:
            if last < blo[C - 1]:
                last = blo[C - 1]
            if last > bhi[C - 1]:
                last = bhi[C - 1]
            b[C - 1] = last
            v = _ratio_value(pc, pxy, alo, b, maximize, coef, cap, order, fill)
            count += 1
            if (maximize and v > best) or ((not maximize) and v < best):
                best = v
                best_b[:] = b
        # odometer, last free axis fastest
        k = C - 2
        while k >= 0:
            idx[k] += 1
            if idx[k] < npts[k]:
                break
            idx[k] = 0
            k -= 1
        if k < 0:
            break
    return best, best_b, count


@njit(cache=True)
def cvar_grid_extremes(lo, hi, y, alpha, step, free):
    m = y.size
    if m == 1:
        return y[0], y[0], 1
    coords = np.empty(m - 1, dtype=np.int64)
    q = 0
    for i in range(m):
        if i != free:
            coords[q] = i
            q += 1
    npts = np.empty(m - 1, dtype=np.int64)
    for i in range(m - 1):
        npts[i] = _n_points(lo[coords[i]], hi[coords[i]], step)
    idx = np.zeros(m - 1, dtype=np.int64)
    p = np.empty(m)
    vmin = np.inf
    vmax = -np.inf
    count = 0
    tol = 1e-12
    while True:
        s = 0.0
        for i in range(m - 1):
            c = coords[i]
            if npts[i] > 1:
                p[c] = lo[c] + (hi[c] - lo[c]) * idx[i] / (npts[i] - 1)
            else:
                p[c] = lo[c]
            s += p[c]
        last = 1.0 - s
        if last >= lo[free] - tol and last <= hi[free] + tol:
            p[free] = last if last > 0.0 else 0.0
            cum = 0.0
            prev = 0.0
            acc = 0.0
            for j in range(m):
                cum += p[j]
                cc = cum if cum < alpha else alpha
                d = cc - prev
                if d > 0.0:
                    acc += d * y[j]
                prev = cc
            v = acc / alpha
            if v < vmin:
                vmin = v
            if v > vmax:
                vmax = v
            count += 1
        k = m - 2
        while k >= 0:
            idx[k] += 1
            if idx[k] < npts[k]:
                break
            idx[k] = 0
            k -= 1
        if k < 0:
            break
    return vmin, vmax, count


@njit(cache=True)
def _optimistic_cvar(counts, total, eps, y, upper, alpha):
    L = y.size
    cum_counts = 0.0
    prev = 0.0
    acc = 0.0
    for j in range(L):
        cum_counts += counts[j]
        if y[j] < upper:
            f = cum_counts / total - eps
            if f < 0.0:
                f = 0.0
        else:
            f = 1.0
        c = f if f < alpha else alpha
        d = c - prev
        if d > 0.0:
            acc += d * y[j]
        prev = c
    acc += upper * (alpha - prev)
    return acc / alpha


@njit(cache=True)
def optimistic_cvar_batch(counts, totals, eps, y, upper, alpha):
    K = counts.shape[0]
    out = np.empty(K)
    for k in range(K):
        out[k] = _optimistic_cvar(counts[k], totals[k], eps[k], y, upper, alpha)
    return out


@njit(cache=True)
def _draw(cdf_row, u):
    L = cdf_row.size
    j = 0
    while j < L - 1 and u >= cdf_row[j]:
        j += 1
    return j


@njit(cache=True)
def run_bandit(level_cdf, y, upper, alpha, horizon, kept, clip, policy, uniforms):
    K, L = level_cdf.shape
    arms = np.empty(horizon, dtype=np.int64)
    levels = np.empty(horizon, dtype=np.int64)
    n_init = kept.size
    n_loop = horizon - n_init
    if n_loop < 0:
        n_loop = 0
    index = np.full((n_loop, K), np.nan)
    counts = np.zeros((K, L), dtype=np.int64)
    T = np.zeros(K, dtype=np.int64)
    log_term = np.log(2.0 * float(horizon) ** 2)
    t = 0
    for i in range(min(n_init, horizon)):
        x = kept[i]
        j = _draw(level_cdf[x], uniforms[t])
        arms[t] = x
        levels[t] = j
        counts[x, j] += 1
        T[x] += 1
        t += 1
    for s in range(n_loop):
        best = -np.inf
        best_x = kept[0]
        for i in range(n_init):
            x = kept[i]
            Tx = float(T[x])
            if policy == 0:
                eps = np.sqrt(log_term / (2.0 * Tx))
                v = _optimistic_cvar(counts[x], Tx, eps, y, upper, alpha)
                if clip[x] < v:
                    v = clip[x]
            else:
                m = 0.0
                for j in range(L):
                    m += counts[x, j] * y[j]
                v = m / Tx + np.sqrt(2.0 * np.log(float(t)) / Tx)
            index[s, x] = v
            if v > best:
                best = v
                best_x = x
        j = _draw(level_cdf[best_x], uniforms[t])
        arms[t] = best_x
        levels[t] = j
        counts[best_x, j] += 1
        T[best_x] += 1
        t += 1
    return arms, levels, index


@njit(cache=True)
def compensated_cumsum(x):
    out = np.empty(x.size)
    s = 0.0
    comp = 0.0
    for i in range(x.size):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i] = s + comp
    return out
