"""Global minimization of the inner-problem value E(a) over the receive gain.

E(a) is piecewise convex: the device partition is constant between the
breakpoints s_k = beta_max_k / (h_k b_max_k); each partition interval splits
at its threshold a_th into a water-filling piece and a noise-floor piece,
and the water-filling piece splits further where devices cross between
the capped and uncapped sets.  Each resulting piece is convex and searched
by golden section; candidates from all pieces, the thresholds and the
global cutoff a_max are compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, S_from_beta
from .lower_solver import (
    LowerSolution,
    Partition,
    a_threshold,
    partition,
    solve_lambda,
    solve_lower,
)

GOLDEN_REL_TOL = 1e-10
SUBINTERVAL_SAMPLES = 256
ROOT_TOL = 1e-10
HET_C_TOL = 1e-9
GUARD_GRID_POINTS = 10_000
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NumericalAnomalyError(RuntimeError):
    """Raised when the sampled geometry contradicts the expected at-most-two
    membership crossings per device inside a water-filling piece."""


@dataclass
class Interval:
    lo: float
    hi: float            # right-open
    part: Partition
    a_th: float
    b_piece: tuple[float, float] | None   # water-filling part [lo, min(a_th, hi))
    c_piece: tuple[float, float] | None   # noise-floor part [a_th, hi)


@dataclass
class IntervalLayout:
    breakpoints: np.ndarray
    a_max: float
    intervals: list[Interval]


@dataclass
class GlobalSolution:
    a: float
    lower: LowerSolution
    S: np.ndarray
    mse: float
    provenance: str
    fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": list(self.lower.b),
            "beta": list(self.lower.beta),
            "S": list(self.S),
            "mse": self.mse,
            "provenance": self.provenance,
            "fallback": self.fallback,
        }


def interval_layout(inst: ProblemInstance) -> IntervalLayout:
    """Partition-constant intervals of the receive gain up to the cutoff.

    a_max is the smallest breakpoint at which the caps of the offset-capable
    devices strictly exceed one; past it E(a) = a^2 sigma^2 and no candidate
    can beat a_max itself.  If the cap sum never exceeds one (it then equals
    one exactly) the cutoff is the largest breakpoint.
    """
    s = inst.beta_max / (inst.h * inst.b_max)
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    caps_sorted = inst.beta_max[order]

    a_max = float(s_sorted[-1])
    seen = 0.0
    for k in range(inst.K):
        seen += float(caps_sorted[k])
        # include every device tied at this breakpoint before testing
        if k + 1 < inst.K and s_sorted[k + 1] == s_sorted[k]:
            continue
        if seen > 1.0:
            a_max = float(s_sorted[k])
            break

    edges = [0.0]
    for v in np.unique(s_sorted):
        if 0.0 < v < a_max:
            edges.append(float(v))
    edges.append(a_max)

    intervals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        part = partition(inst, mid)
        a_th = a_threshold(inst, part)
        split = min(max(a_th, lo), hi)
        b_piece = (lo, split) if split > lo else None
        c_piece = (split, hi) if split < hi else None
        intervals.append(
            Interval(lo=lo, hi=hi, part=part, a_th=a_th,
                     b_piece=b_piece, c_piece=c_piece)
        )
    return IntervalLayout(breakpoints=np.sort(s), a_max=a_max, intervals=intervals)


def F_values(inst: ProblemInstance, a: float) -> np.ndarray:
    """Per-device water-level slack x_k = -lambda*(a) / (2 c_k); zeros when
    the weight-sum equation has no negative-multiplier solution."""
    part = partition(inst, a)
    if not part.k2:
        return np.zeros(inst.K)
    lam = solve_lambda(inst, a, part)
    if lam is None:
        return np.zeros(inst.K)
    return -lam / (2.0 * inst.c)


def _crossing_gap(inst: ProblemInstance, a: float) -> np.ndarray:
    # g_k(a) = x_k(a) - (cap_k - a h_k b_max_k); sign decides capped membership
    x = F_values(inst, a)
    return x - (inst.beta_max - a * inst.h * inst.b_max)


def subintervals(
    inst: ProblemInstance,
    b_piece: tuple[float, float],
    part: Partition,
    n_samples: int = SUBINTERVAL_SAMPLES,
) -> list[tuple[float, float]]:
    """Split a water-filling piece at the gains where a device crosses
    between the capped and uncapped sets.

    Boundaries are found by sampling each device's crossing gap on a uniform
    grid and bisecting every sign change; a device crossing more than twice
    contradicts the convex-versus-line geometry and raises.
    """
    lo, hi = b_piece
    pad = 1e-12 * max(hi - lo, 1.0)
    grid = np.linspace(lo + pad, hi - pad, n_samples)
    k2 = list(part.k2)
    gaps = np.array([_crossing_gap(inst, a)[k2] for a in grid])  # (n, |K2|)
    # near-zero gaps take the uncapped convention (degenerate tangency)
    signs = gaps > 1e-12

    roots = []
    for j, k in enumerate(k2):
        col = signs[:, j]
        flips = np.nonzero(col[1:] != col[:-1])[0]
        if len(flips) > 2:
            raise NumericalAnomalyError(
                f"device {k} crosses the capped/uncapped boundary "
                f"{len(flips)} times in {b_piece}"
            )
        for i in flips:
            x0, x1 = float(grid[i]), float(grid[i + 1])
            f0 = gaps[i, j]
            while x1 - x0 > ROOT_TOL:
                xm = 0.5 * (x0 + x1)
                fm = _crossing_gap(inst, xm)[k]
                if (fm > 1e-12) == (f0 > 1e-12):
                    x0 = xm
                else:
                    x1 = xm
            roots.append(0.5 * (x0 + x1))

    cuts = [lo] + sorted(r for r in roots if lo < r < hi) + [hi]
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def _golden_min(fn, lo: float, hi: float, rel_tol: float = GOLDEN_REL_TOL):
    """Golden-section minimum of a unimodal fn on [lo, hi]; endpoint values
    are included as candidates (the open endpoint 0 is never evaluated)."""
    cache: dict[float, float] = {}

    def f(x: float) -> float:
        if x not in cache:
            cache[x] = fn(x)
        return cache[x]

    width = hi - lo
    tol = rel_tol * width
    x1 = hi - _INVPHI * width
    x2 = lo + _INVPHI * width
    f1, f2 = f(x1), f(x2)
    a_, b_ = lo, hi
    while b_ - a_ > tol:
        if f1 < f2:
            b_, x2, f2 = x2, x1, f1
            x1 = b_ - _INVPHI * (b_ - a_)
            f1 = f(x1)
        else:
            a_, x1, f1 = x1, x2, f2
            x2 = a_ + _INVPHI * (b_ - a_)
            f2 = f(x2)
    candidates = [0.5 * (a_ + b_), x1, x2]
    if lo > 0.0:
        candidates.append(lo)
    candidates.append(hi)
    best = min(candidates, key=lambda x: (f(x), x))
    return best, f(best)


def minimize_interval(
    inst: ProblemInstance, piece: tuple[float, float]
) -> tuple[float, float]:
    """Golden-section minimum of E(a) on one convex piece, with E always
    evaluated by running the inner solver."""
    return _golden_min(lambda a: solve_lower(inst, a).E, piece[0], piece[1])


def solve_global(
    inst: ProblemInstance, n_samples: int = SUBINTERVAL_SAMPLES
) -> GlobalSolution:
    """Globally minimize E(a) over a > 0.

    Compares the golden-section minima of every convex sub-piece with the
    per-interval thresholds and the cutoff a_max; ties break toward the
    smaller gain.  With heterogeneous gradient-power weights the piecewise
    convexity argument is unsupported, so the structured answer is checked
    against a dense grid and downgraded if the grid wins; a sampling anomaly
    triggers the same grid fallback.
    """
    layout = interval_layout(inst)
    candidates: list[tuple[float, float, str]] = []  # (E, a, provenance)
    fallback = False
    try:
        for m, iv in enumerate(layout.intervals):
            if iv.b_piece is not None:
                for piece in subintervals(inst, iv.b_piece, iv.part, n_samples):
                    a0, e0 = minimize_interval(inst, piece)
                    candidates.append((e0, a0, f"B[{m}]{piece}"))
            if iv.c_piece is not None:
                a_th = iv.c_piece[0]
                candidates.append(
                    (a_th * a_th * inst.sigma2, a_th, f"C[{m}]-left-endpoint")
                )
        candidates.append(
            (layout.a_max ** 2 * inst.sigma2, layout.a_max, "a_max")
        )
        best_e, best_a, provenance = min(candidates, key=lambda t: (t[0], t[1]))
    except NumericalAnomalyError:
        best_a, best_e, provenance, fallback = *_grid_best(inst, layout), "grid-fallback", True

    c = inst.c
    if float(c.max()) / float(c.min()) > 1.0 + HET_C_TOL:
        grid_a, grid_e = _grid_best(inst, layout)
        if grid_e < best_e:
            best_a, best_e, provenance = grid_a, grid_e, "grid-guard"

    lower = solve_lower(inst, best_a)
    S = S_from_beta(lower.beta, inst, rounding="continuous")
    return GlobalSolution(
        a=best_a, lower=lower, S=S, mse=lower.E,
        provenance=provenance, fallback=fallback,
    )


def _grid_best(inst: ProblemInstance, layout: IntervalLayout) -> tuple[float, float]:
    # local import: verification also imports this module's layout helpers
    from .verification import lower_value_grid

    grid = lower_value_grid(inst, GUARD_GRID_POINTS, a_max=layout.a_max)
    a_arr, e_arr = grid
    i = int(np.argmin(e_arr))
    return float(a_arr[i]), float(e_arr[i])
