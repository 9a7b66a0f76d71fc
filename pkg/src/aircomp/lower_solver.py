"""Exact solver for the fixed-receive-gain inner problem.

For a given receive gain a the inner problem minimizes
sum_k (a b_k h_k - beta_k)^2 c_k + a^2 sigma^2 over the transmit gains
(boxed) and the weights (capped simplex).  It is convex and its optimum
falls into one of three regimes:

* BISECTION: the simplex multiplier lambda* < 0 is found by bisection on
  the water-filling equation sum_{K1} cap_k + sum_{K2} beta_k(lambda) = 1;
* A_GE_ATH: the gain is large enough that every distortion term can be
  zeroed and the objective hits the noise floor a^2 sigma^2;
* SUM_BMAX_GT_1: the caps of the saturated devices alone exceed one, and a
  deterministic fill construction again reaches the noise floor.

`kkt_certify` reconstructs all multipliers of the optimality system and
reports residuals; it is used by tests only, never on the solve path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, mse_beta

BISECT_TOL = 1e-12   # absolute tolerance on lambda
DELTA_CAP = 0.5      # mass routed to unsaturated devices in the fill branch

BRANCH_BISECTION = "BISECTION"
BRANCH_A_GE_ATH = "A_GE_ATH"
BRANCH_SUM_BMAX_GT_1 = "SUM_BMAX_GT_1"


@dataclass(frozen=True)
class Partition:
    """Devices split by whether the gain cap allows an exact offset:
    K1 = {k : a h_k b_max_k >= beta_max_k}, K2 the complement."""

    k1: tuple[int, ...]
    k2: tuple[int, ...]


@dataclass
class LowerSolution:
    b: np.ndarray
    beta: np.ndarray
    branch: str
    lambda_star: float | None
    E: float

    def to_dict(self) -> dict:
        return {
            "b": list(self.b),
            "beta": list(self.beta),
            "branch": self.branch,
            "lambda_star": self.lambda_star,
            "E": self.E,
        }


@dataclass
class KktResiduals:
    lam: float
    z: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    mu: np.ndarray
    stationarity_beta: np.ndarray
    stationarity_b: np.ndarray
    complementarity: np.ndarray   # (K, 4): z*beta, y*(beta-cap), gamma*b, mu*(b-bmax)
    primal: np.ndarray            # box violations and |sum(beta) - 1|

    @property
    def max_residual(self) -> float:
        return max(
            float(np.max(np.abs(self.stationarity_beta), initial=0.0)),
            float(np.max(np.abs(self.stationarity_b), initial=0.0)),
            float(np.max(np.abs(self.complementarity), initial=0.0)),
            float(np.max(np.abs(self.primal), initial=0.0)),
        )


def partition(inst: ProblemInstance, a: float) -> Partition:
    """Split devices by a h_k b_max_k >= beta_max_k (ties go to K1)."""
    offset_ok = a * inst.h * inst.b_max >= inst.beta_max
    k1 = tuple(int(k) for k in np.nonzero(offset_ok)[0])
    k2 = tuple(int(k) for k in np.nonzero(~offset_ok)[0])
    return Partition(k1=k1, k2=k2)


def a_threshold(inst: ProblemInstance, part: Partition) -> float:
    """Receive-gain threshold a_th = (1 - sum_{K1} cap) / sum_{K2} h b_max.

    With K2 empty (caps in K1 summing to exactly one) the threshold is 0:
    the whole interval sits in the noise-floor regime.
    """
    caps = inst.beta_max
    s1 = float(caps[list(part.k1)].sum()) if part.k1 else 0.0
    if s1 > 1.0:
        raise ValueError("sum of K1 caps exceeds 1; use the fill branch")
    if not part.k2:
        return 0.0
    denom = float((inst.h * inst.b_max)[list(part.k2)].sum())
    return (1.0 - s1) / denom


def lambda_min(inst: ProblemInstance, a: float, k2) -> float:
    """Lower end of the bisection bracket:
    min_{k in K2} 2 c_k (a h_k b_max_k - beta_max_k)."""
    k2 = list(k2)
    if not k2:
        raise ValueError("lambda_min is undefined for empty K2")
    vals = 2.0 * inst.c * (a * inst.h * inst.b_max - inst.beta_max)
    return float(vals[k2].min())


def beta_of_lambda(inst: ProblemInstance, a: float, lam: float, k2) -> np.ndarray:
    """Water-filling weights beta_k(lambda) = min(a h b_max - lambda/(2c), cap)
    for k in K2 (non-increasing in lambda)."""
    k2 = list(k2)
    ahb = (a * inst.h * inst.b_max)[k2]
    caps = inst.beta_max[k2]
    return np.minimum(ahb - lam / (2.0 * inst.c[k2]), caps)


def solve_lambda(inst: ProblemInstance, a: float, part: Partition) -> float | None:
    """Bisection for the multiplier solving the weight-sum equation.

    Returns None when the left-hand side at lambda -> 0- is already >= 1
    (i.e. a >= a_th), which routes the caller to the noise-floor branch.
    """
    if not part.k2:
        raise ValueError("solve_lambda requires a non-empty K2")
    caps = inst.beta_max
    s1 = float(caps[list(part.k1)].sum()) if part.k1 else 0.0
    if s1 > 1.0:
        raise ValueError("sum of K1 caps exceeds 1; use the fill branch")
    k2 = list(part.k2)
    ahb = [float(v) for v in (a * inst.h * inst.b_max)[k2]]
    inv2c = [1.0 / (2.0 * float(c)) for c in inst.c[k2]]
    bcap = [float(v) for v in caps[k2]]
    target = 1.0 - s1

    def phi(lam: float) -> float:
        s = 0.0
        for v, ic, bm in zip(ahb, inv2c, bcap):
            t = v - lam * ic
            s += t if t < bm else bm
        return s

    if phi(0.0) >= target:
        return None
    lo = lambda_min(inst, a, k2)   # phi(lo) = sum of caps >= target
    hi = 0.0
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if phi(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_lower(inst: ProblemInstance, a: float) -> LowerSolution:
    """Exact inner-problem solution at receive gain a (three branches)."""
    if not a > 0:
        raise ValueError("receive gain must be positive")
    K = inst.K
    caps = inst.beta_max
    h, bmax = inst.h, inst.b_max
    part = partition(inst, a)
    k1, k2 = list(part.k1), list(part.k2)
    s1 = float(caps[k1].sum()) if k1 else 0.0

    b = np.zeros(K)
    beta = np.zeros(K)

    if s1 > 1.0:
        # fill construction: every distortion term is zeroed exactly
        ahb2 = a * h[k2] * bmax[k2] if k2 else np.array([])
        delta = min(DELTA_CAP, float(ahb2.min())) if k2 else 0.0
        remaining = 1.0 - delta
        for k in k1:   # ascending index, fill up to the cap
            take = min(caps[k], remaining)
            beta[k] = take
            remaining -= take
            if remaining <= 0.0:
                break
        if k2 and delta > 0.0:
            beta[k2] = delta * ahb2 / float(ahb2.sum())
        nz = beta > 0
        b[nz] = beta[nz] / (a * h[nz])
        E = a * a * inst.sigma2
        return LowerSolution(b=b, beta=beta, branch=BRANCH_SUM_BMAX_GT_1,
                             lambda_star=None, E=E)

    lam = solve_lambda(inst, a, part) if k2 else None
    beta[k1] = caps[k1]
    b[k1] = caps[k1] / (a * h[k1])

    if lam is None:
        # a >= a_th: scale K2 gains so every offset is exact
        if k2:
            ath = a_threshold(inst, part)
            b[k2] = ath * bmax[k2] / a
            beta[k2] = ath * h[k2] * bmax[k2]
        E = a * a * inst.sigma2
        return LowerSolution(b=b, beta=beta, branch=BRANCH_A_GE_ATH,
                             lambda_star=None, E=E)

    b[k2] = bmax[k2]
    beta[k2] = beta_of_lambda(inst, a, lam, k2)
    # clamp the weight sum to exactly 1 by nudging the K2 device with the
    # most room in the needed direction (bisection leaves O(K * tol) slack)
    deficit = 1.0 - float(beta.sum())
    if deficit != 0.0 and k2:
        if deficit > 0:
            j = k2[int(np.argmax(caps[k2] - beta[k2]))]
        else:
            j = k2[int(np.argmax(beta[k2]))]
        beta[j] = min(max(beta[j] + deficit, 0.0), caps[j])
    E = mse_beta(inst, a, b, beta)
    return LowerSolution(b=b, beta=beta, branch=BRANCH_BISECTION,
                         lambda_star=lam, E=E)


def kkt_certify(
    inst: ProblemInstance, a: float, sol: LowerSolution, active_tol: float = 1e-9
) -> KktResiduals:
    """Reconstruct the multipliers of the optimality system for a claimed
    solution and report all residuals (certification only)."""
    K = inst.K
    h, bmax, c, caps = inst.h, inst.b_max, inst.c, inst.beta_max
    b, beta = np.asarray(sol.b, dtype=float), np.asarray(sol.beta, dtype=float)
    lam = sol.lambda_star if sol.branch == BRANCH_BISECTION else 0.0

    g = 2.0 * c * (a * b * h - beta)
    z = np.zeros(K)
    y = np.zeros(K)
    gamma = np.zeros(K)
    mu = np.zeros(K)

    at_lo_beta = beta <= active_tol
    at_hi_beta = beta >= caps - active_tol
    z[at_lo_beta] = np.maximum(0.0, (lam - g)[at_lo_beta])
    y[at_hi_beta & ~at_lo_beta] = np.maximum(0.0, (g - lam)[at_hi_beta & ~at_lo_beta])

    t = -g * a * h   # required mu - gamma
    at_lo_b = b <= active_tol
    at_hi_b = b >= bmax - active_tol
    gamma[at_lo_b] = np.maximum(0.0, -t[at_lo_b])
    mu[at_hi_b & ~at_lo_b] = np.maximum(0.0, t[at_hi_b & ~at_lo_b])

    stat_beta = lam - z + y - g
    stat_b = g * a * h + mu - gamma
    compl = np.stack(
        [z * beta, y * (beta - caps), gamma * b, mu * (b - bmax)], axis=1
    )
    primal = np.array(
        [
            float(np.max(np.maximum(-beta, 0.0), initial=0.0)),
            float(np.max(np.maximum(beta - caps, 0.0), initial=0.0)),
            float(np.max(np.maximum(-b, 0.0), initial=0.0)),
            float(np.max(np.maximum(b - bmax, 0.0), initial=0.0)),
            abs(float(beta.sum()) - 1.0),
        ]
    )
    return KktResiduals(
        lam=lam, z=z, y=y, gamma=gamma, mu=mu,
        stationarity_beta=stat_beta, stationarity_b=stat_b,
        complementarity=compl, primal=primal,
    )
