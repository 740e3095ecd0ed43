"""Mini-batch color transfer and mini-batch Wasserstein gradient flow."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DiscreteMeasure, InvalidInputError, build_cost, wasserstein2
from .errors import TransportError
from .minibatch import ABSENT_TOL, BatchSpec, SolverKind, derive_seed, sample_batches, solve_pairs


class IterationError(TransportError):
    """An application loop failed at a given iteration / Euler step."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True, eq=False)
class ImageRGB:
    width: int
    height: int
    pixels: np.ndarray  # (height * width, 3), row-major, values in [0, 1]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("image dimensions must be positive")
        px = np.asarray(self.pixels, dtype=float).reshape(-1, 3)
        if px.shape[0] != self.width * self.height:
            raise InvalidInputError(f"{px.shape[0]} pixels for a {self.width}x{self.height} image")
        object.__setattr__(self, "pixels", np.clip(px, 0.0, 1.0))

    @classmethod
    def from_array(cls, arr) -> "ImageRGB":
        arr = np.asarray(arr, dtype=float)
        h, w = arr.shape[:2]
        return cls(w, h, arr.reshape(-1, 3))

    def to_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width, 3)

    @property
    def size(self) -> int:
        return self.width * self.height


def color_transfer(
    src: ImageRGB,
    tgt: ImageRGB,
    k: int,
    m: int,
    solver: SolverKind,
    seed: int,
    metric: str = "squared_euclidean",
    threads: int = 1,
    return_visits: bool = False,
):
    """Recolor ``src`` with the palette of ``tgt`` through mini-batch barycentric maps.

    Each iteration pairs ``m`` random source pixels with ``m`` random target
    pixels, solves the chosen transport between their colors and moves every
    source pixel whose plan row carries mass to the row-normalized barycenter
    of its targets. A pixel's output is the mean over its visits; pixels
    never given mass keep their color.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if m > min(src.size, tgt.size):
        raise InvalidInputError(f"batch size {m} exceeds the pixel count")
    pairs = sample_batches((src.size, tgt.size), BatchSpec(m, k, "with_replacement", seed))
    source = DiscreteMeasure.uniform(src.pixels)
    target = DiscreteMeasure.uniform(tgt.pixels)
    try:
        records = solve_pairs(source, target, pairs, solver, metric, threads)
    except TransportError as exc:
        raise IterationError(getattr(exc, "batch", -1), str(exc)) from exc

    acc = np.zeros_like(src.pixels)
    visits = np.zeros(src.size)
    for rec in records:
        mass = rec.plan.sum(axis=1)
        live = mass > ABSENT_TOL
        bary = rec.plan[live] @ tgt.pixels[rec.target] / mass[live][:, None]
        acc[rec.source[live]] += bary
        visits[rec.source[live]] += 1
    out = src.pixels.copy()
    seen = visits > 0
    out[seen] = acc[seen] / visits[seen][:, None]
    image = ImageRGB(src.width, src.height, out)
    return (image, visits) if return_visits else image


def batch_cost_gradient(X, Y, plan) -> np.ndarray:
    """Gradient of ``sum_ij plan_ij |x_i - y_j|^2`` in ``X`` with the plan held fixed."""
    X = np.asarray(X, dtype=float)
    return 2.0 * (plan.sum(axis=1)[:, None] * X - plan @ np.asarray(Y, dtype=float))


@dataclass(eq=False)
class FlowTrajectory:
    snapshots: list = field(default_factory=list)
    w2_curve: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def final_w2(self) -> float:
        return self.w2_curve[-1][1]


def gradient_flow(
    init: DiscreteMeasure,
    target: DiscreteMeasure,
    loss: SolverKind,
    k: int,
    m: int,
    lr: float,
    steps: int,
    seed: int,
    eval_every: int = 100,
    threads: int = 1,
    particle_scaling: bool = True,
) -> FlowTrajectory:
    """Euler scheme for the flow of a mini-batch transport loss.

    Every step draws ``k`` fresh batch pairs, solves the chosen transport on
    squared Euclidean costs and moves the sampled particles along
    ``-lr * grad``, where ``grad`` is the fixed-plan gradient of the mean
    batch cost. With ``particle_scaling`` the gradient is multiplied by the
    particle count, i.e. each particle follows the Wasserstein gradient of
    its own 1/n mass instead of its share of the loss.

    W2 to the target is recorded at step 0, every ``eval_every`` steps and
    after the last step.
    """
    if not lr >= 0:
        raise InvalidInputError("lr must be >= 0")
    if steps < 0 or eval_every < 1:
        raise InvalidInputError("steps must be >= 0 and eval_every >= 1")
    X = init.points.copy()
    n = X.shape[0]
    scale = float(n) if particle_scaling else 1.0
    traj = FlowTrajectory(config=dict(loss=loss.kind, k=k, m=m, lr=lr, steps=steps, seed=seed,
                                      eval_every=eval_every, particle_scaling=particle_scaling))

    def record(step):
        try:
            w2 = wasserstein2(DiscreteMeasure(X, init.weights), target)
        except TransportError as exc:
            raise IterationError(step, str(exc)) from exc
        traj.snapshots.append((step, X.copy()))
        traj.w2_curve.append((step, w2))

    record(0)
    for step in range(1, steps + 1):
        spec = BatchSpec(m, k, "with_replacement", derive_seed(seed, step))
        pairs = sample_batches((n, target.size), spec)
        current = DiscreteMeasure(X, init.weights)
        try:
            records = solve_pairs(current, target, pairs, loss, "squared_euclidean", threads)
        except TransportError as exc:
            raise IterationError(step, str(exc)) from exc
        grad = np.zeros_like(X)
        for rec in records:
            grad[rec.source] += batch_cost_gradient(X[rec.source], target.points[rec.target], rec.plan) / k
        X = X - lr * scale * grad
        if not np.all(np.isfinite(X)):
            raise IterationError(step, "particle positions became non-finite")
        if step % eval_every == 0 or step == steps:
            record(step)
    return traj


def fixed_plan_batch_cost(X, Y, plan) -> float:
    return float(np.sum(build_cost(X, Y, "squared_euclidean").entries * plan))
