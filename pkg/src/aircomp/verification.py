"""Independent oracles and property probes for the solvers.

The oracles are deliberately simple: a dense grid over the receive gain, a
projected-gradient minimizer for the inner problem, and sampled
monotonicity/convexity probes.  The grid engine solves the piecewise-linear
water-filling equation by sorting its kinks instead of bisection, so the two
routes share no numeric code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, eliminate_b, mse_beta

PROJ_TOL = 1e-12
LOWER_ORACLE_ITERS = 100_000


@dataclass
class OracleReport:
    oracle: str
    best_value: float
    best_point: object
    gap: float          # solver value minus oracle value
    samples: int
    passed: bool


def batch_lower_values(inst: ProblemInstance, a: np.ndarray) -> np.ndarray:
    """Inner-problem optimal value E(a) for an array of gains, computed by
    solving the water-filling equation exactly via sorted kinks.

    Per gain: with eff_k = min(a h_k b_max_k, cap_k), the optimal weights
    solve sum_k min(eff_k - lam/(2 c_k), cap_k) = 1 for lam <= 0; devices
    already able to offset contribute their caps throughout.  If the
    eff-sum already reaches one the noise floor a^2 sigma^2 is attained.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    n = len(a)
    h, bmax, c, caps = inst.h, inst.b_max, inst.c, inst.beta_max
    eff = np.minimum(a[:, None] * h * bmax, caps)          # (n, K)
    floor = eff.sum(axis=1) >= 1.0
    E = a * a * inst.sigma2

    need = ~floor
    if not np.any(need):
        return E

    effn = eff[need]
    inv2c = 1.0 / (2.0 * c)
    kinks = (effn - caps) / inv2c                          # 2 c (eff - cap) <= 0
    order = np.argsort(kinks, axis=1)[:, ::-1]             # descending
    k_sorted = np.take_along_axis(kinks, order, axis=1)
    caps_s = np.broadcast_to(caps, effn.shape)
    caps_s = np.take_along_axis(caps_s, order, axis=1)
    eff_s = np.take_along_axis(effn, order, axis=1)
    inv_s = np.take_along_axis(np.broadcast_to(inv2c, effn.shape), order, axis=1)

    cap_pref = np.cumsum(caps_s, axis=1)                   # clipped mass
    eff_tail = eff_s.sum(axis=1, keepdims=True) - np.cumsum(eff_s, axis=1)
    inv_tail = inv_s.sum(axis=1, keepdims=True) - np.cumsum(inv_s, axis=1)
    # phi at each kink: first j devices clipped, rest on the water level
    phi_at_kink = cap_pref + eff_tail - k_sorted * inv_tail
    # phi(k_sorted[:, j]) is non-decreasing in j; find the first j with phi >= 1
    j = np.argmax(phi_at_kink >= 1.0, axis=1)
    rows = np.arange(len(effn))
    clipped = np.where(j > 0, cap_pref[rows, j - 1], 0.0)
    eff_un = eff_s.sum(axis=1) - clipped_sum(eff_s, j)
    inv_un = inv_s.sum(axis=1) - clipped_sum(inv_s, j)
    lam = (clipped + eff_un - 1.0) / inv_un
    # distortion per device: max(lam/(2c), eff - cap), zero for K1 devices
    d = np.maximum(lam[:, None] * inv2c, effn - caps)
    E[need] += (c * d * d).sum(axis=1)
    return E


def clipped_sum(sorted_vals: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Row-wise sum of the first j entries of each row."""
    pref = np.cumsum(sorted_vals, axis=1)
    rows = np.arange(len(sorted_vals))
    return np.where(j > 0, pref[rows, np.maximum(j - 1, 0)], 0.0)


def lower_value_grid(
    inst: ProblemInstance, n_points: int, a_max: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced gain grid on (0, a_max], refined with every breakpoint and
    per-interval threshold, together with E(a) at each point."""
    from .upper_solver import interval_layout

    layout = interval_layout(inst)
    if a_max is None:
        a_max = layout.a_max
    extras = [a_max]
    extras += [float(s) for s in layout.breakpoints if 0.0 < s <= a_max]
    for iv in layout.intervals:
        if iv.lo < iv.a_th <= a_max and iv.a_th > 0.0:
            extras.append(float(iv.a_th))
        if iv.lo > 0.0:
            extras.append(iv.lo)
    n_log = max(n_points - len(extras), 2)
    grid = np.concatenate([
        np.geomspace(a_max * 1e-6, a_max, n_log),
        np.array(sorted(set(extras))),
    ])
    grid = np.unique(grid)
    return grid, batch_lower_values(inst, grid)


def grid_oracle(
    inst: ProblemInstance,
    n_points: int = 100_000,
    solver_value: float | None = None,
    rel_tol: float = 1e-3,
) -> OracleReport:
    """Best E(a) over a dense gain grid; an upper bound on the optimum."""
    grid, vals = lower_value_grid(inst, n_points)
    i = int(np.argmin(vals))
    best = float(vals[i])
    gap = (solver_value - best) if solver_value is not None else 0.0
    passed = solver_value is None or abs(gap) <= rel_tol * best
    return OracleReport(
        oracle="grid",
        best_value=best,
        best_point=float(grid[i]),
        gap=gap,
        samples=len(grid),
        passed=passed,
    )


def project_capped_simplex(v: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {0 <= x <= caps, sum(x) = 1} by bisecting
    the shift t in sum_k clip(v_k - t, 0, caps_k) = 1."""
    v = np.asarray(v, dtype=float)
    lo = float(np.min(v - caps)) - 1.0   # everything at its cap: sum >= 1
    hi = float(np.max(v))                # everything at zero: sum = 0
    while hi - lo > PROJ_TOL:
        t = 0.5 * (lo + hi)
        total = float(np.clip(v - t, 0.0, caps).sum())
        if total > 1.0:
            lo = t
        else:
            hi = t
    return np.clip(v - 0.5 * (lo + hi), 0.0, caps)


def lower_oracle(
    inst: ProblemInstance,
    a: float,
    iters: int = LOWER_ORACLE_ITERS,
    solver_value: float | None = None,
    abs_tol: float = 1e-5,
) -> OracleReport:
    """Projected gradient descent on the weights with the gains eliminated.

    With b_k = min(b_max, beta_k / (a h_k)) the objective reduces to
    sum_k c_k max(beta_k - a h_k b_max_k, 0)^2 + a^2 sigma^2, minimized on
    the capped simplex with step 1/(2 max c).
    """
    caps = inst.beta_max
    ahb = a * inst.h * inst.b_max
    c = inst.c
    step = 1.0 / (2.0 * float(c.max()))

    beta = project_capped_simplex(np.full(inst.K, 1.0 / inst.K), caps)
    used = 0
    prev_val = np.inf
    stall = 0
    for used in range(1, iters + 1):
        excess = np.maximum(beta - ahb, 0.0)
        grad = 2.0 * c * excess
        new_beta = project_capped_simplex(beta - step * grad, caps)
        val = float((c * np.maximum(new_beta - ahb, 0.0) ** 2).sum())
        if abs(prev_val - val) < 1e-16 and float(np.abs(new_beta - beta).max()) < 1e-13:
            stall += 1
            if stall >= 5:
                beta = new_beta
                break
        else:
            stall = 0
        beta, prev_val = new_beta, val

    b = eliminate_b(inst, a, beta)
    best = mse_beta(inst, a, b, beta)
    gap = (solver_value - best) if solver_value is not None else 0.0
    passed = solver_value is None or abs(gap) <= abs_tol
    return OracleReport(
        oracle="projected-gradient",
        best_value=best,
        best_point=beta,
        gap=gap,
        samples=used,
        passed=passed,
    )


def probe_monotone_convex(
    xs: np.ndarray, fs: np.ndarray, tol: float = 1e-9
) -> tuple[int, int]:
    """Count non-increase and midpoint-convexity violations beyond tol on a
    uniformly spaced sample; returns (monotone, convex) violation counts."""
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    steps = np.diff(xs)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ValueError("samples must be uniformly spaced")
    mono = int(np.sum(fs[1:] > fs[:-1] + tol))
    conv = int(np.sum(fs[1:-1] > 0.5 * (fs[:-2] + fs[2:]) + tol))
    return mono, conv
