"""Lower-tail CVaR of discrete rewards and its propagation through
probability intervals.

Orientation: CVaR here is the mean of the worst ``alpha`` fraction of
*rewards*, so higher is better and ``CVaR_1`` is the mean.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .causal_bounds import ProbabilityInterval
from .model import BINARY_SUPPORT, DiscreteDistribution, RewardSupport, ValidationError

SUM_TOL = 1e-9


class EmptyFeasibleSetError(ValueError):
    """No probability vector satisfies the per-outcome intervals."""


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"risk level alpha must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True)
class CvarInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValidationError(f"invalid CVaR interval [{self.lower}, {self.upper}]")

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= v <= self.upper + tol


@dataclass(frozen=True)
class OutcomeIntervalSet:
    """Per-level bounds ``a_i <= P(y_i) <= b_i``."""

    support: RewardSupport
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.clip(np.asarray(self.lower, dtype=float), 0.0, 1.0)
        hi = np.clip(np.asarray(self.upper, dtype=float), 0.0, 1.0)
        if lo.shape != (len(self.support),) or hi.shape != lo.shape:
            raise ValidationError("one interval per support level is required")
        if np.any(lo > hi + 1e-12):
            raise ValidationError("interval lower end exceeds upper end")
        if lo.sum() > 1 + SUM_TOL or hi.sum() < 1 - SUM_TOL:
            raise EmptyFeasibleSetError("sum of lower ends > 1 or sum of upper ends < 1")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", np.maximum(hi, lo))

    @classmethod
    def from_intervals(cls, support: RewardSupport, intervals) -> "OutcomeIntervalSet":
        return cls(support, [iv.lower for iv in intervals], [iv.upper for iv in intervals])

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))


def cvar_discrete(dist: DiscreteDistribution, alpha: float) -> float:
    """CVaR by the branch formula.

    ``k`` is the largest index whose cumulative mass stays below ``alpha``;
    the tail is ``y_0..y_k`` in full plus the ``alpha - F(y_k)`` slice of
    ``y_{k+1}``. ``k = -1`` (``p_0 >= alpha``) gives ``y_0``.
    """
    alpha = _check_alpha(alpha)
    return _cvar_probs(dist.probs, dist.support.array, alpha)


def _cvar_probs(p: np.ndarray, y: np.ndarray, alpha: float) -> float:
    cum = np.cumsum(p)
    below = np.nonzero(cum < alpha)[0]
    if below.size == 0:
        return float(y[0])
    k = int(below[-1])
    if k + 1 >= y.size:
        # only reachable through round-off when alpha == 1
        return float(np.dot(p, y) / cum[-1])
    return float((np.dot(y[: k + 1], p[: k + 1]) + y[k + 1] * (alpha - cum[k])) / alpha)


@dataclass(frozen=True)
class StepCDF:
    """Right-continuous step CDF: ``F(t) = values[j]`` on ``[points[j], points[j+1])``."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.points, dtype=float)
        F = np.asarray(self.values, dtype=float)
        if z.shape != F.shape or z.ndim != 1 or z.size == 0:
            raise ValidationError("points and values must be equal-length vectors")
        if np.any(np.diff(z) <= 0):
            raise ValidationError("points must be strictly increasing")
        if np.any(np.diff(F) < -1e-12) or F[0] < -1e-12:
            raise ValidationError("CDF must be nondecreasing and nonnegative")
        object.__setattr__(self, "points", z)
        object.__setattr__(self, "values", F)

    def __call__(self, t: float) -> float:
        j = int(np.searchsorted(self.points, t, side="right")) - 1
        return 0.0 if j < 0 else float(self.values[j])

    @classmethod
    def from_distribution(cls, dist: DiscreteDistribution) -> "StepCDF":
        return cls(dist.support.array, dist.cdf())


def cvar_of_cdf(F: StepCDF, alpha: float) -> float:
    """``sup_nu {nu - (1/alpha) int_0^nu F(t) dt}`` for a step CDF on ``[0, U]``.

    The supremum sits at ``nu* = inf{t : F(t) >= alpha}``; the integral is
    summed exactly over the steps.
    """
    alpha = _check_alpha(alpha)
    z, Fv = F.points, F.values
    if Fv[-1] < 1.0 - 1e-12:
        raise ValidationError("CDF must reach 1 at the upper reward bound")
    j = int(np.argmax(Fv >= alpha - 1e-15))
    nu = z[j]
    widths = np.diff(z[: j + 1])
    integral = float(np.dot(Fv[:j], widths))
    return float(nu - integral / alpha)


def cvar_bounds_general(intervals: OutcomeIntervalSet, alpha: float, sense: str) -> float:
    """Exact extreme CVaR over ``{p : a <= p <= b, sum p = 1}``.

    Enumerates the branches of the piecewise CVaR formula. Branch ``k``
    (``sum_{i<=k} p_i <= alpha <= sum_{i<=k+1} p_i``) has a linear objective
    over a small polytope; its optimum is found by enumerating the
    polytope's vertices. Branch ``-1`` is ``p_0 >= alpha`` with value
    ``y_0``. Adjacent branches share their boundary, so the closed branches
    lose nothing at ties.
    """
    alpha = _check_alpha(alpha)
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    y = intervals.support.array
    lo, hi = intervals.lower, intervals.upper
    m = y.size
    best = None
    better = (lambda u, v: u < v) if sense == "min" else (lambda u, v: u > v)
    # branch -1: p_0 can reach alpha
    if m == 1 or min(hi[0], 1.0 - lo[1:].sum()) >= alpha - SUM_TOL:
        best = float(y[0])
    for k in range(m - 1):
        val = _branch_extreme(y, lo, hi, alpha, k, sense)
        if val is not None and (best is None or better(val, best)):
            best = val
    if best is None:
        raise EmptyFeasibleSetError("no branch of the CVaR program is feasible")
    return best


def _branch_extreme(y, lo, hi, alpha, k, sense):
    m = y.size
    # objective: (1/alpha) [sum_{i<=k} (y_i - y_{k+1}) p_i + y_{k+1} alpha]
    c = np.zeros(m)
    c[: k + 1] = (y[: k + 1] - y[k + 1]) / alpha
    const = float(y[k + 1])
    rows, rhs = [], []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        rows.append(e)
        rhs.append(hi[i])
        rows.append(-e)
        rhs.append(-lo[i])
    s_k = np.zeros(m)
    s_k[: k + 1] = 1.0
    s_k1 = np.zeros(m)
    s_k1[: k + 2] = 1.0
    rows.append(s_k)
    rhs.append(alpha)
    rows.append(-s_k1)
    rhs.append(-alpha)
    G = np.array(rows)
    h = np.array(rhs)
    verts = _vertices(G, h, np.ones(m), 1.0)
    if verts.size == 0:
        return None
    vals = verts @ c + const
    return float(vals.min() if sense == "min" else vals.max())


def _vertices(G, h, eq, eq_rhs, tol=1e-10):
    """Vertices of ``{p : G p <= h, eq . p = eq_rhs}`` by active-set enumeration."""
    m = G.shape[1]
    combos = np.array(list(itertools.combinations(range(G.shape[0]), m - 1)), dtype=int)
    if combos.size == 0:
        combos = np.zeros((1, 0), dtype=int)
    A = np.empty((combos.shape[0], m, m))
    rhs = np.empty((combos.shape[0], m))
    A[:, 0, :] = eq
    rhs[:, 0] = eq_rhs
    if m > 1:
        A[:, 1:, :] = G[combos]
        rhs[:, 1:] = h[combos]
    det = np.linalg.det(A)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return np.zeros((0, m))
    P = np.linalg.solve(A[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(P @ G.T <= h + tol, axis=1)
    return P[feas]


def cvar_bounds_binary(p1: ProbabilityInterval, alpha: float,
                       support: RewardSupport = BINARY_SUPPORT) -> CvarInterval:
    """Closed-form CVaR interval for a two-point reward.

    With ``p_0 = 1 - p_1``, CVaR is ``y_0`` when ``p_0 >= alpha`` and
    ``y_0 + (y_1 - y_0)(1 - p_0/alpha)`` otherwise: nonincreasing in
    ``p_0``, so the interval ends are read off the ends of ``p_1``'s range.
    """
    alpha = _check_alpha(alpha)
    if len(support) != 2:
        raise ValidationError("binary closed form needs a two-point support")
    if not (0.0 <= p1.lower <= p1.upper <= 1.0 + 1e-12):
        raise ValidationError("invalid probability interval for P(y_1)")
    y0, y1 = support.values

    def at(p0):
        return y0 if p0 >= alpha else y0 + (y1 - y0) * (1.0 - p0 / alpha)

    return CvarInterval(at(min(1.0, 1.0 - p1.lower)), at(max(0.0, 1.0 - min(p1.upper, 1.0))))


def cvar_bounds_dominance(intervals: OutcomeIntervalSet, alpha: float) -> CvarInterval:
    """Extreme CVaRs via the stochastically smallest/largest feasible laws.

    CVaR is monotone under first-order dominance; the box-simplex slice has
    a pointwise largest CDF (fill mass from the lowest level up) and a
    pointwise smallest one (fill from the top down).
    """
    alpha = _check_alpha(alpha)
    y = intervals.support.array
    lo, hi = intervals.lower, intervals.upper

    def fill(order):
        p = lo.copy()
        rem = 1.0 - p.sum()
        for i in order:
            add = min(hi[i] - lo[i], rem)
            p[i] += add
            rem -= add
        return p

    worst = fill(range(y.size))
    best = fill(reversed(range(y.size)))
    return CvarInterval(_cvar_probs(worst, y, alpha), _cvar_probs(best, y, alpha))


def cvar_grid_oracle(intervals: OutcomeIntervalSet, alpha: float, step: float = 1e-3):
    """Min and max CVaR over a grid of the box-simplex slice (independent check).

    The box is first shrunk to each coordinate's feasible range under the
    unit sum, and the grid is repeated with every coordinate in turn fixed
    by the sum, so all vertices of the slice are grid points.
    """
    alpha = _check_alpha(alpha)
    if step <= 0:
        raise ValueError("step must be positive")
    lo, hi = intervals.lower, intervals.upper
    lo_t = np.maximum(lo, 1.0 - (hi.sum() - hi))
    hi_t = np.minimum(hi, 1.0 - (lo.sum() - lo))
    y = intervals.support.array
    vmin, vmax, n = np.inf, -np.inf, 0
    for free in range(y.size):
        a, b, k = K.cvar_grid_extremes(lo_t, hi_t, y, alpha, float(step), free)
        if k:
            vmin, vmax, n = min(vmin, a), max(vmax, b), n + k
    if n == 0:
        raise EmptyFeasibleSetError("grid found no feasible probability vector")
    return float(vmin), float(vmax), int(n)


def cvar_interval(intervals: OutcomeIntervalSet, alpha: float) -> CvarInterval:
    lo = cvar_bounds_general(intervals, alpha, "min")
    hi = cvar_bounds_general(intervals, alpha, "max")
    return CvarInterval(lo, max(hi, lo))
