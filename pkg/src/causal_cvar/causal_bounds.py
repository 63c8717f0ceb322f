"""Partial-identification bounds on ``P(y|do(x))`` from ``P(x, y)`` and ``P(c)``.

Two intervals are available:

* :func:`tian_pearl_bounds`, the assumption-free ``[P(x,y), 1 - P(x,y')]``;
* :func:`do_probability_bounds`, the tighter program that also uses the
  context marginal. Its objective ``sum_c P(c) a_c / b_c`` is a sum of
  ratios, so it is solved by spatial branch-and-bound over ``b`` with the
  ``a``-subproblem solved exactly by a greedy fill for every fixed ``b``.

:func:`brute_force_do_bounds` is an exhaustive grid over ``b`` and serves as
an independent oracle for small context sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .model import JointActionRewardTable, ValidationError

FEAS_TOL = 1e-7


class UnidentifiableArmError(ValueError):
    """The arm has zero observational mass, ``P(x) = 0``."""


class InconsistentInputsError(ValueError):
    """The constraint set of the bound program is empty."""


@dataclass(frozen=True)
class ProbabilityInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not (-1e-12 <= self.lower <= self.upper + 1e-12 and self.upper <= 1 + 1e-12):
            raise ValidationError(f"invalid probability interval [{self.lower}, {self.upper}]")

    def contains(self, p: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= p <= self.upper + tol

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class DoBoundResult:
    """Solution of one sense of the bound program.

    ``value`` is attained by the certificate ``(a, b)``; ``bound`` is the
    certified outer bound (``<= value`` for min, ``>= value`` for max), and
    ``gap = |bound - value|``.
    """

    value: float
    bound: float
    a: np.ndarray
    b: np.ndarray
    sense: str
    nodes: int = 0
    iterations: int = 0
    converged: bool = True

    @property
    def gap(self) -> float:
        return abs(self.bound - self.value)


@dataclass(frozen=True)
class BoundProblem:
    """Data of one ``(arm, level)`` instance of the bound program."""

    pc: np.ndarray
    px: float
    pxy: float

    @property
    def a_lo(self) -> np.ndarray:
        return np.maximum(0.0, self.pxy + self.pc - 1.0)

    @property
    def a_hi(self) -> np.ndarray:
        return np.minimum(self.pxy, self.pc)

    @property
    def b_lo(self) -> np.ndarray:
        return np.maximum(0.0, self.px + self.pc - 1.0)

    @property
    def b_hi(self) -> np.ndarray:
        return np.minimum(self.pc, self.px)

    def check_feasible(self) -> None:
        if self.px <= 0:
            raise UnidentifiableArmError("P(x) = 0: the arm never appears in the data")
        if self.pxy < -FEAS_TOL or self.pxy > self.px + FEAS_TOL:
            raise InconsistentInputsError("need 0 <= P(x,y) <= P(x)")
        if abs(self.pc.sum() - 1.0) > 1e-9 or np.any(self.pc < 0):
            raise InconsistentInputsError("P(c) must be a probability vector")
        blo, bhi, alo = self.b_lo, self.b_hi, self.a_lo
        if blo.sum() > self.px + FEAS_TOL or bhi.sum() < self.px - FEAS_TOL:
            raise InconsistentInputsError("no b satisfies the box and sum constraints")
        if alo.sum() > self.pxy + FEAS_TOL or np.minimum(self.pxy, bhi).sum() < self.pxy - FEAS_TOL:
            raise InconsistentInputsError("no a satisfies the box and sum constraints")

    def objective(self, a: np.ndarray, b: np.ndarray) -> float:
        pos = b > 0
        return float(np.sum(self.pc[pos] * a[pos] / b[pos]))

    def violation(self, a: np.ndarray, b: np.ndarray) -> float:
        """Largest constraint violation of ``(a, b)``."""
        pc = self.pc
        terms = [
            b - pc, a - b, a - self.pxy, b - self.px,
            self.pxy + pc - 1.0 - a, self.px + pc - 1.0 - b, -a, -b,
        ]
        v = max(float(np.max(t)) for t in terms)
        v = max(v, abs(a.sum() - self.pxy), abs(b.sum() - self.px))
        return max(v, 0.0)


def _problem(joint: JointActionRewardTable, context_marginal, arm: int, level: int) -> BoundProblem:
    pc = np.asarray(context_marginal, dtype=float)
    prob = BoundProblem(pc, joint.p_x(arm), joint.p_xy(arm, level))
    prob.check_feasible()
    return prob


def tian_pearl_bounds(joint: JointActionRewardTable, arm: int, level: int) -> ProbabilityInterval:
    """``[P(x,y), 1 - sum_{y' != y} P(x,y')]`` as a closed interval."""
    pxy = joint.p_xy(arm, level)
    other = joint.p_x(arm) - pxy
    return ProbabilityInterval(pxy, min(1.0, 1.0 - other))


def inner_allocation(b, prob: BoundProblem, sense: str) -> tuple[np.ndarray, float]:
    """Exact optimal ``a`` for fixed ``b``.

    With ``b`` fixed the objective is linear in ``a`` with coefficients
    ``P(c)/b_c``; start every ``a_c`` at its lower limit and pour the
    remaining ``P(x,y)`` mass into the best coefficients first. Contexts
    with ``b_c = 0`` are forced to ``a_c = 0`` and contribute nothing.
    """
    b = np.asarray(b, dtype=float)
    maximize = _is_max(sense)
    if b.shape != prob.pc.shape:
        raise ValueError("b must have one entry per context")
    pos = b > 0
    lo = np.where(pos, prob.a_lo, 0.0)
    hi = np.where(pos, np.minimum(prob.pxy, b), 0.0)
    if np.any(lo > hi + FEAS_TOL) or lo.sum() > prob.pxy + FEAS_TOL or hi.sum() < prob.pxy - FEAS_TOL:
        raise InconsistentInputsError("a-box is infeasible for this b")
    coef = np.where(pos, prob.pc / np.where(pos, b, 1.0), 0.0)
    fill = K.greedy_fill(coef[None, :], np.maximum(hi - lo, 0.0)[None, :],
                         np.array([prob.pxy - lo.sum()]), maximize)[0]
    a = lo + fill
    return a, float(np.dot(a, coef))


def _is_max(sense: str) -> bool:
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    return sense == "max"


def _tighten(lo, hi, px):
    """Propagate the sum constraint into the node boxes."""
    slo = lo.sum(axis=1, keepdims=True)
    shi = hi.sum(axis=1, keepdims=True)
    lo = np.maximum(lo, px - (shi - hi))
    hi = np.minimum(hi, px - (slo - lo))
    return lo, hi


def _relaxation(prob: BoundProblem, lo, hi, maximize):
    """Outer bound of the program restricted to each node box.

    max: ``a_c/b_c <= min(1, a_c/lo_c)`` (concave, two-piece in ``a_c``);
    min: ``a_c/b_c >= a_c/hi_c`` (linear). Both relax ``a_c <= b_c`` to
    ``a_c <= hi_c`` and are solved exactly by greedy fills.
    """
    pc, pxy = prob.pc[None, :], prob.pxy
    alo = np.broadcast_to(prob.a_lo, lo.shape)
    cap = np.minimum(pxy, hi)
    alo_eff = np.where(cap > 0, alo, 0.0)
    rem = pxy - alo_eff.sum(axis=1)
    if maximize:
        pos = lo > 0
        safe_lo = np.where(pos, lo, 1.0)
        base = np.where(pos, pc * np.minimum(1.0, alo_eff / safe_lo), np.where(cap > 0, pc, 0.0))
        slope = np.where(pos, pc / safe_lo, 0.0)
        seg = np.where(pos, np.maximum(np.minimum(cap, lo) - alo_eff, 0.0), 0.0)
        fill = K.greedy_fill(slope, seg, rem, True)
        return base.sum(axis=1) + (fill * slope).sum(axis=1)
    pos = hi > 0
    coef = np.where(pos, pc / np.where(pos, hi, 1.0), 0.0)
    fill = K.greedy_fill(coef, np.maximum(cap - alo_eff, 0.0), rem, False)
    return ((alo_eff + fill) * coef).sum(axis=1)


def _solve_bnb(prob: BoundProblem, maximize: bool, tol: float, gap_tol: float, max_iter: int,
               max_nodes: int):
    """Spatial branch-and-bound over the b-slice.

    Works on the whole frontier at once, in "maximise" orientation
    (``sgn * f``). Nodes whose bound is within ``tol`` of the incumbent are
    pruned; the search stops once the certified global gap is at most
    ``gap_tol`` or the budget is spent.
    """
    sgn = 1.0 if maximize else -1.0
    px = prob.px
    alo = prob.a_lo
    lo = prob.b_lo[None, :].copy()
    hi = prob.b_hi[None, :].copy()
    # Tian-Pearl limits bound every node as well
    cap_bound = sgn * (1.0 - (prob.px - prob.pxy) if maximize else prob.pxy)
    best_val, best_b = -np.inf, None
    pruned_bound = -np.inf
    open_bound = -np.inf
    nodes = 0
    it = 0
    while True:
        it += 1
        lo, hi = _tighten(lo, hi, px)
        ok = np.all(lo <= hi + 1e-13, axis=1)
        lo, hi = lo[ok], np.maximum(hi[ok], lo[ok])
        if lo.shape[0] == 0:
            open_bound = -np.inf
            break
        nodes += lo.shape[0]
        width = hi - lo
        wsum = width.sum(axis=1)
        theta = np.where(wsum > 0, (px - lo.sum(axis=1)) / np.where(wsum > 0, wsum, 1.0), 0.0)
        b_try = np.clip(lo + np.clip(theta, 0.0, 1.0)[:, None] * width, lo, hi)
        vals = sgn * K.do_ratio_eval(prob.pc, prob.pxy, alo, b_try, maximize)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_b = float(vals[i]), b_try[i].copy()
        bounds = np.minimum(sgn * _relaxation(prob, lo, hi, maximize), cap_bound)
        bounds = np.maximum(bounds, vals)
        keep = bounds > best_val + tol
        if np.any(~keep):
            pruned_bound = max(pruned_bound, float(bounds[~keep].max()))
        lo, hi, bounds = lo[keep], hi[keep], bounds[keep]
        open_bound = float(bounds.max()) if bounds.size else -np.inf
        if max(open_bound, pruned_bound) - best_val <= gap_tol:
            break
        if it >= max_iter or lo.shape[0] > max_nodes:
            break
        width = hi - lo
        axis = np.argmax(width, axis=1)
        rows = np.arange(lo.shape[0])
        mid = lo[rows, axis] + 0.5 * width[rows, axis]
        lo2, hi2 = lo.copy(), hi.copy()
        hi[rows, axis] = mid
        lo2[rows, axis] = mid
        lo = np.concatenate([lo, lo2])
        hi = np.concatenate([hi, hi2])
    outer = max(best_val, pruned_bound, open_bound)
    converged = outer - best_val <= gap_tol
    return sgn * best_val, sgn * outer, best_b, nodes, it, converged


def do_probability_bounds(joint: JointActionRewardTable, context_marginal, arm: int, level: int,
                          sense: str, **solver_kw) -> DoBoundResult:
    """One side of the context-marginal bound on ``P(y|do(x))``.

    Returns the best attained objective with its ``(a, b)`` certificate and
    a certified outer bound; ``converged`` means the two differ by at most
    ``gap_tol``.
    """
    prob = _problem(joint, context_marginal, arm, level)
    return solve_bound_problem(prob, sense, **solver_kw)


def solve_bound_problem(prob: BoundProblem, sense: str, *, tol: float = 1e-8, gap_tol: float = 1e-6,
                        max_iter: int = 200, max_nodes: int = 20_000) -> DoBoundResult:
    maximize = _is_max(sense)
    prob.check_feasible()
    val, outer, b, nodes, it, conv = _solve_bnb(prob, maximize, tol, gap_tol, max_iter, max_nodes)
    a, v = inner_allocation(b, prob, sense)
    return DoBoundResult(value=v, bound=outer, a=a, b=b, sense=sense, nodes=nodes,
                         iterations=it, converged=conv)


def do_interval(joint: JointActionRewardTable, context_marginal, arm: int, level: int,
                **kw) -> tuple[ProbabilityInterval, DoBoundResult, DoBoundResult]:
    """Certified ``[LB, UB]`` from both senses (outer bounds, so always sound)."""
    lo = do_probability_bounds(joint, context_marginal, arm, level, "min", **kw)
    hi = do_probability_bounds(joint, context_marginal, arm, level, "max", **kw)
    lower = min(max(lo.bound, 0.0), 1.0)
    upper = max(min(hi.bound, 1.0), lower)
    return ProbabilityInterval(lower, upper), lo, hi


@dataclass
class OracleResult:
    value: float
    b: np.ndarray
    a: np.ndarray
    points: int
    resolution: float
    error_bound: float = field(default=float("nan"))


def brute_force_do_bounds(joint: JointActionRewardTable, context_marginal, arm: int, level: int,
                          sense: str, resolution: float = 1e-3) -> OracleResult:
    """Exhaustive grid over feasible ``b`` with the exact inner allocation.

    Intended for ``|C| <= 4``. ``error_bound`` is a Lipschitz estimate
    ``resolution * sum_c P(c)/b_min_c`` with ``b_min_c`` the smallest
    positive grid value of each coordinate; it is informative only, since
    the objective jumps where some ``b_c`` reaches zero.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    prob = _problem(joint, context_marginal, arm, level)
    return grid_bound_problem(prob, sense, resolution)


def grid_bound_problem(prob: BoundProblem, sense: str, resolution: float) -> OracleResult:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if prob.pc.size > 4:
        raise ValueError("grid oracle is limited to |C| <= 4")
    maximize = _is_max(sense)
    blo, bhi = prob.b_lo, prob.b_hi
    val, b, n = K.do_grid_extreme(prob.pc, prob.px, prob.pxy, prob.a_lo, blo, bhi,
                                  float(resolution), maximize)
    if n == 0 or b is None:
        raise InconsistentInputsError("grid found no feasible b; refine the resolution")
    b = np.asarray(b, dtype=float)
    a, v = inner_allocation(b, prob, sense)
    bmin = np.maximum(blo, resolution)
    err = float(resolution * np.sum(prob.pc / bmin))
    return OracleResult(value=float(val), b=b, a=a, points=int(n), resolution=float(resolution),
                        error_bound=err)
