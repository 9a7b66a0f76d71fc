"""Desk-scale federated training over a simulated noisy analog channel.

Each round every device averages per-sample gradients over a freshly drawn
subset of its data, the receiver recovers a * sum_k b_k h_k grad_k plus
amplified Gaussian noise, and the model takes a plain gradient step on the
recovered aggregate.  The synthetic task is convex (least squares or
logistic) so the aggregation-MSE -> training-loss link is observable
without any deep-learning machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Allocation, ProblemInstance, floor_with_repair, make_instance
from .experiments import philox_stream, run_policy


@dataclass
class SyntheticTask:
    X: list[np.ndarray]        # per-device feature matrices (D_k, n_features)
    y: list[np.ndarray]        # per-device labels
    loss: str = "least-squares"

    @property
    def n_features(self) -> int:
        return self.X[0].shape[1]

    def sample_loss(self, w: np.ndarray, x: np.ndarray, yv: float) -> float:
        r = float(x @ w)
        if self.loss == "least-squares":
            return (r - yv) ** 2
        return math.log1p(math.exp(-(2.0 * yv - 1.0) * r))

    def sample_grad(self, w: np.ndarray, x: np.ndarray, yv: float) -> np.ndarray:
        r = float(x @ w)
        if self.loss == "least-squares":
            return 2.0 * x * (r - yv)
        s = 2.0 * yv - 1.0
        return -s * x / (1.0 + math.exp(s * r))

    def global_loss(self, w: np.ndarray) -> float:
        total = 0.0
        n = 0
        for X, y in zip(self.X, self.y):
            r = X @ w
            if self.loss == "least-squares":
                total += float(((r - y) ** 2).sum())
            else:
                s = 2.0 * y - 1.0
                total += float(np.logaddexp(0.0, -s * r).sum())
            n += len(y)
        return total / n


@dataclass
class TrainingRun:
    eta: float
    ws: list[np.ndarray] = field(default_factory=list)       # w_0 .. w_T
    ideal: list[np.ndarray] = field(default_factory=list)    # z_t
    received: list[np.ndarray] = field(default_factory=list)  # z_hat_t
    realized_sq_err: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.received)


def make_task(inst: ProblemInstance, n_features: int, seed: int,
              loss: str = "least-squares", label_noise: float = 0.1) -> SyntheticTask:
    """Synthetic convex task with all devices sampling one distribution;
    per-device dataset sizes follow the instance."""
    rng = philox_stream(seed, axis_index=101)
    w_true = rng.normal(size=n_features)
    X, y = [], []
    for d in inst.devices:
        n = int(round(d.D))
        Xi = rng.normal(size=(n, n_features))
        margins = Xi @ w_true
        if loss == "least-squares":
            yi = margins + label_noise * rng.normal(size=n)
        else:
            yi = (rng.random(n) < 1.0 / (1.0 + np.exp(-margins))).astype(float)
        X.append(Xi)
        y.append(yi)
    return SyntheticTask(X=X, y=y, loss=loss)


def local_gradient(task: SyntheticTask, k: int, w: np.ndarray, S_k: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Average of per-sample gradients over a size-S_k subset drawn without
    replacement; the full batch when S_k equals the local dataset size."""
    n = len(task.y[k])
    S_k = int(S_k)
    if S_k <= 0:
        return np.zeros(task.n_features)
    if S_k >= n:
        idx = np.arange(n)
    else:
        idx = rng.choice(n, size=S_k, replace=False)
    X = task.X[k][idx]
    y = task.y[k][idx]
    r = X @ w
    if task.loss == "least-squares":
        return 2.0 * (X.T @ (r - y)) / S_k
    s = 2.0 * y - 1.0
    return -(X.T @ (s / (1.0 + np.exp(s * r)))) / S_k


def ideal_aggregate(grads: list[np.ndarray], S: np.ndarray) -> np.ndarray:
    """Data-size-weighted gradient average sum_k (S_k / sum S) grad_k."""
    S = np.asarray(S, dtype=float)
    total = float(S.sum())
    z = np.zeros_like(grads[0])
    for g, s in zip(grads, S):
        if s > 0:
            z += (s / total) * g
    return z


def ota_aggregate(grads: list[np.ndarray], alloc: Allocation, h: np.ndarray,
                  sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Receiver-side recovery a * sum_k b_k h_k grad_k + a * n with
    i.i.d. N(0, sigma2) noise entries."""
    z = np.zeros_like(grads[0])
    for g, b, hk in zip(grads, alloc.b, h):
        z += b * hk * g
    noise = rng.normal(scale=math.sqrt(sigma2), size=z.shape)
    return alloc.a * (z + noise)


def empirical_c(task: SyntheticTask, w: np.ndarray) -> np.ndarray:
    """Warm-up estimate of E{||grad_k||^2} from full-batch gradients."""
    out = []
    for k in range(len(task.X)):
        g = local_gradient(task, k, w, len(task.y[k]), philox_stream(0))
        out.append(float(g @ g))
    return np.array(out)


def train(inst: ProblemInstance, policy: str, task: SyntheticTask, T: int,
          eta: float, seed: int, c_mode: str = "unit",
          alloc: Allocation | None = None) -> TrainingRun:
    """Run T federated rounds under one allocation policy.

    The allocation is computed once up front (static channels).  c_mode
    selects the gradient-power weights fed to the optimizer: "unit" keeps
    c_k = 1, "empirical" measures full-batch gradient norms at w_0.
    A pre-built allocation bypasses the policy entirely.
    """
    w = np.zeros(task.n_features)
    if alloc is None:
        if c_mode == "empirical":
            c = np.maximum(empirical_c(task, w), 1e-12)
        elif c_mode == "unit":
            c = np.ones(inst.K)
        else:
            raise ValueError(f"unknown c_mode {c_mode!r}")
        opt_inst = make_instance(h=inst.h, b_max=inst.b_max, c=c, D=inst.D,
                                 S_T=inst.S_T, sigma2=inst.sigma2)
        alloc = run_policy(opt_inst, policy)

    S = floor_with_repair(np.asarray(alloc.S, dtype=float), inst)
    run = TrainingRun(eta=eta)
    run.ws.append(w.copy())
    run.losses.append(task.global_loss(w))
    noise_rng = philox_stream(seed, axis_index=202)
    for t in range(T):
        grads = [
            local_gradient(task, k, w, int(S[k]),
                           philox_stream(seed, axis_index=303 + k, trial=t))
            for k in range(inst.K)
        ]
        z = ideal_aggregate(grads, S)
        z_hat = ota_aggregate(grads, alloc, inst.h, inst.sigma2, noise_rng)
        w = w - eta * z_hat
        run.ws.append(w.copy())
        run.ideal.append(z)
        run.received.append(z_hat)
        run.realized_sq_err.append(float(((z_hat - z) ** 2).sum()))
        run.grad_norms.append(float(np.linalg.norm(z)))
        run.losses.append(task.global_loss(w))
    return run
