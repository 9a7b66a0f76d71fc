"""Domain types and the MSE objective for over-the-air gradient aggregation.

An instance bundles per-device channel coefficients, transmit-gain caps,
expected squared gradient norms and dataset sizes, together with the data
threshold S_T and the receiver noise variance.  Aggregation weights
beta_k = S_k / sum(S) live on a capped simplex; the maps between data sizes
and weights are bijective on the feasible regions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

FEAS_TOL = 1e-9


class DegenerateWeightsError(ValueError):
    """Raised when all data sizes (or all weights) are zero."""


@dataclass(frozen=True)
class DeviceParams:
    h: float        # channel coefficient (real, after phase compensation)
    b_max: float    # transmit gain cap
    c: float        # expected squared gradient norm
    D: float        # local dataset size

    def __post_init__(self):
        if not (self.h > 0 and self.b_max > 0 and self.c > 0 and self.D > 0):
            raise ValueError(f"device parameters must be positive, got {self}")


@dataclass
class ProblemInstance:
    devices: list[DeviceParams]
    S_T: float      # minimal total data amount
    sigma2: float   # noise variance

    @property
    def K(self) -> int:
        return len(self.devices)

    @cached_property
    def h(self) -> np.ndarray:
        return np.array([d.h for d in self.devices])

    @cached_property
    def b_max(self) -> np.ndarray:
        return np.array([d.b_max for d in self.devices])

    @cached_property
    def c(self) -> np.ndarray:
        return np.array([d.c for d in self.devices])

    @cached_property
    def D(self) -> np.ndarray:
        return np.array([d.D for d in self.devices])

    @cached_property
    def beta_max(self) -> np.ndarray:
        return self.D / self.S_T

    def to_dict(self) -> dict:
        return {
            "devices": [
                {"h": d.h, "b_max": d.b_max, "c": d.c, "D": d.D}
                for d in self.devices
            ],
            "S_T": self.S_T,
            "sigma2": self.sigma2,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        devices = [
            DeviceParams(h=d["h"], b_max=d["b_max"], c=d["c"], D=d["D"])
            for d in data["devices"]
        ]
        return cls(devices=devices, S_T=data["S_T"], sigma2=data["sigma2"])

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


@dataclass
class Allocation:
    a: float
    b: np.ndarray
    S: np.ndarray
    mse: float

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": list(self.b),
            "S": list(self.S),
            "mse": self.mse,
        }


def validate_instance(inst: ProblemInstance) -> str | None:
    """Check all instance invariants; return None if ok, else a message
    naming the first violated constraint."""
    if inst.K < 1:
        return "instance has no devices"
    for i, d in enumerate(inst.devices):
        if not d.h > 0:
            return f"device {i}: h must be positive"
        if not d.b_max > 0:
            return f"device {i}: b_max must be positive"
        if not d.c > 0:
            return f"device {i}: c must be positive"
        if not d.D > 0:
            return f"device {i}: D must be positive"
    if not inst.sigma2 > 0:
        return "sigma2 must be positive"
    if not inst.S_T > 0:
        return "S_T must be positive"
    if inst.S_T > float(np.sum(inst.D)) + FEAS_TOL:
        return "S_T exceeds sum of D"
    return None


def beta_max(inst: ProblemInstance) -> np.ndarray:
    """Per-device weight caps D_k / S_T."""
    return inst.D / inst.S_T


def check_weights(inst: ProblemInstance, beta: np.ndarray, tol: float = FEAS_TOL) -> bool:
    """True if beta is on the capped simplex {0 <= beta <= beta_max, sum = 1}."""
    beta = np.asarray(beta, dtype=float)
    caps = inst.beta_max
    return bool(
        beta.shape == caps.shape
        and np.all(beta >= -tol)
        and np.all(beta <= caps + tol)
        and abs(float(beta.sum()) - 1.0) <= tol
    )


def mse(inst: ProblemInstance, a: float, b: np.ndarray, S: np.ndarray) -> float:
    """Aggregation MSE with the participation indicator on each device:
    sum_k (a b_k h_k - S_k/sum(S))^2 c_k 1(S_k > 0) + a^2 sigma^2."""
    b = np.asarray(b, dtype=float)
    S = np.asarray(S, dtype=float)
    total = float(S.sum())
    if total <= 0.0:
        raise DegenerateWeightsError("sum of data sizes is zero")
    beta = S / total
    active = S > 0
    dist = (a * b * inst.h - beta) ** 2 * inst.c
    return float(dist[active].sum()) + a * a * inst.sigma2


def mse_beta(inst: ProblemInstance, a: float, b: np.ndarray, beta: np.ndarray) -> float:
    """Indicator-free objective sum_k (a b_k h_k - beta_k)^2 c_k + a^2 sigma^2.

    This is the canonical objective minimized by the solvers; it coincides
    with `mse` after the transmit gains of inactive devices are zeroed.
    """
    b = np.asarray(b, dtype=float)
    beta = np.asarray(beta, dtype=float)
    dist = (a * b * inst.h - beta) ** 2 * inst.c
    return float(dist.sum()) + a * a * inst.sigma2


def beta_from_S(S: np.ndarray) -> np.ndarray:
    """Forward map beta_k = S_k / sum(S)."""
    S = np.asarray(S, dtype=float)
    total = float(S.sum())
    if total <= 0.0:
        raise DegenerateWeightsError("sum of data sizes is zero")
    return S / total


def S_from_beta(
    beta: np.ndarray, inst: ProblemInstance, rounding: str = "continuous"
) -> np.ndarray:
    """Canonical preimage of a weight vector: S_k = beta_k / Xi with
    Xi = max_k beta_k / D_k, which lands inside the boxes and meets the
    data threshold.

    rounding="floor-with-repair" floors each S_k and then restores
    sum(S) >= S_T by adding units to devices with slack, largest
    fractional part first.
    """
    beta = np.asarray(beta, dtype=float)
    if float(beta.max(initial=0.0)) <= 0.0:
        raise DegenerateWeightsError("all weights are zero")
    xi = float(np.max(beta / inst.D))
    S = beta / xi
    if rounding == "continuous":
        return S
    if rounding != "floor-with-repair":
        raise ValueError(f"unknown rounding mode {rounding!r}")
    return floor_with_repair(S, inst)


def floor_with_repair(S: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Floor each data size, then restore sum(S) >= S_T by adding units to
    devices with slack, largest fractional part first."""
    S = np.asarray(S, dtype=float)
    floored = np.floor(S)
    frac = S - floored
    order = sorted(range(inst.K), key=lambda k: (-frac[k], k))
    total = float(floored.sum())
    while total < inst.S_T - FEAS_TOL:
        progressed = False
        for k in order:
            if floored[k] + 1.0 <= inst.D[k] + FEAS_TOL:
                floored[k] += 1.0
                total += 1.0
                progressed = True
                if total >= inst.S_T - FEAS_TOL:
                    break
        if not progressed:
            raise ValueError("cannot repair rounded sizes to meet S_T")
    return floored


def eliminate_b(inst: ProblemInstance, a: float, beta: np.ndarray) -> np.ndarray:
    """Per-device minimizer of (a b_k h_k - beta_k)^2 c_k over [0, b_max]:
    b_k = min(b_max, beta_k / (a h_k))."""
    beta = np.asarray(beta, dtype=float)
    return np.minimum(inst.b_max, beta / (a * inst.h))


def make_instance(
    h, b_max, c, D, S_T: float, sigma2: float = 1.0
) -> ProblemInstance:
    """Convenience constructor from parallel sequences or scalars."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    K = len(h)

    def expand(v):
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 0:
            arr = np.full(K, float(arr))
        return arr

    b_max, c, D = expand(b_max), expand(c), expand(D)
    devices = [
        DeviceParams(h=float(h[k]), b_max=float(b_max[k]), c=float(c[k]), D=float(D[k]))
        for k in range(K)
    ]
    return ProblemInstance(devices=devices, S_T=float(S_T), sigma2=float(sigma2))
