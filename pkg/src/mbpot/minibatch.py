"""Mini-batch sampling and the OT / UOT / POT mini-batch estimators."""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DiscreteMeasure,
    InvalidInputError,
    SolverParams,
    TransportPlan,
    build_cost,
    solve_ot_entropic,
    solve_ot_exact,
)
from .errors import ResourceLimitError, TransportError
from .partial import PartialParams, solve_pot_entropic, solve_pot_exact
from .unbalanced import UotParams, solve_uot_entropic

SAMPLING = ("with_replacement", "without_replacement")
KINDS = ("ot", "uot", "pot")
ENUMERATION_CAP = 10**6
ABSENT_TOL = 1e-12

# spawn-key prefixes keep the independent and epoch streams disjoint
_INDEPENDENT, _EPOCH, _ALIGN, _DERIVED = 0, 1, 2, 3


class BatchSolveError(TransportError):
    """A per-batch solve failed; ``batch`` is the failing batch index."""

    def __init__(self, batch: int, cause: Exception):
        super().__init__(f"batch {batch}: {cause}")
        self.batch = batch
        self.cause = cause


@dataclass(frozen=True)
class BatchSpec:
    batch_size: int
    num_batches: int = 1
    sampling: str = "with_replacement"
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_batches < 1:
            raise InvalidInputError(f"num_batches must be >= 1, got {self.num_batches}")
        if self.sampling not in SAMPLING:
            raise InvalidInputError(f"unknown sampling {self.sampling!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SolverKind:
    """Which transport each batch pair is solved with.

    ``entropic`` switches OT and POT to their Sinkhorn variants; UOT is
    always entropic and reads its own ``uot.entropic`` settings.
    """

    kind: str = "ot"
    uot: UotParams | None = None
    pot: PartialParams | None = None
    entropic: SolverParams | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown solver kind {self.kind!r}")
        if self.kind == "uot" and self.uot is None:
            raise InvalidInputError("kind 'uot' needs UotParams")
        if self.kind == "pot" and self.pot is None:
            raise InvalidInputError("kind 'pot' needs PartialParams")

    def solve(self, a, b, C) -> TransportPlan:
        if self.kind == "ot":
            return solve_ot_exact(a, b, C) if self.entropic is None else solve_ot_entropic(a, b, C, self.entropic)
        if self.kind == "uot":
            return solve_uot_entropic(a, b, C, self.uot)
        pot = self.pot
        if pot.entropic is None and self.entropic is not None:
            pot = PartialParams(pot.fraction, pot.dummy_cost, self.entropic)
        return solve_pot_exact(a, b, C, pot) if pot.entropic is None else solve_pot_entropic(a, b, C, pot)

    @property
    def target_mass(self) -> float | None:
        if self.kind == "ot":
            return 1.0
        if self.kind == "pot":
            return self.pot.fraction
        return None


@dataclass(frozen=True, eq=False)
class BatchRecord:
    source: np.ndarray
    target: np.ndarray
    objective: float
    mass: float
    plan: np.ndarray
    converged: bool = True


@dataclass(frozen=True, eq=False)
class AggregatedResult:
    value: float
    padded_plan: np.ndarray
    batch_records: list = field(default_factory=list)
    kind: str = "ot"

    @property
    def mass(self) -> float:
        return float(self.padded_plan.sum())

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.batch_records)


@dataclass(frozen=True, eq=False)
class AlignmentBlock:
    source: np.ndarray
    target: np.ndarray
    plan: np.ndarray


@dataclass(frozen=True, eq=False)
class Alignment:
    """Two-stage alignment: one large solve, argmax matching, small blocks.

    ``gamma[i]`` is the dataset index of the target aligned with
    ``source_indices[i]``, or -1 when that row carries no mass.
    """

    source_indices: np.ndarray
    target_indices: np.ndarray
    gamma: np.ndarray
    plan: np.ndarray
    blocks: list

    @property
    def absent(self) -> int:
        return int(np.sum(self.gamma < 0))


def batch_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream ``key`` of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed for substream ``key`` (e.g. one replicate or one flow step)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_DERIVED,) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _sizes(n):
    if isinstance(n, (tuple, list)):
        return int(n[0]), int(n[1])
    return int(n), int(n)


def sample_batches(n, spec: BatchSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Draw ``spec.num_batches`` (source, target) index sets of size ``batch_size``.

    ``n`` is the shared support size or a ``(n_source, n_target)`` pair.
    Indices never repeat inside a batch. ``with_replacement`` draws every
    batch independently from its own substream ``(seed, i)``;
    ``without_replacement`` cuts consecutive chunks from per-epoch
    permutations, so no index repeats until an epoch is exhausted. Returned
    index arrays are sorted.
    """
    ns, nt = _sizes(n)
    m = spec.batch_size
    if m > min(ns, nt):
        raise InvalidInputError(f"batch size {m} exceeds support size {min(ns, nt)}")
    out = []
    if spec.sampling == "with_replacement":
        for i in range(spec.num_batches):
            rng = batch_rng(spec.seed, _INDEPENDENT, i)
            src = rng.choice(ns, size=m, replace=False)
            tgt = rng.choice(nt, size=m, replace=False)
            out.append((np.sort(src), np.sort(tgt)))
        return out
    per_src, per_tgt = ns // m, nt // m
    for i in range(spec.num_batches):
        e_src, pos_src = divmod(i, per_src)
        e_tgt, pos_tgt = divmod(i, per_tgt)
        src = batch_rng(spec.seed, _EPOCH, 0, e_src).permutation(ns)[pos_src * m:(pos_src + 1) * m]
        tgt = batch_rng(spec.seed, _EPOCH, 1, e_tgt).permutation(nt)[pos_tgt * m:(pos_tgt + 1) * m]
        out.append((np.sort(src), np.sort(tgt)))
    return out


def count_batch_pairs(n, m) -> int:
    ns, nt = _sizes(n)
    return math.comb(ns, m) * math.comb(nt, m)


def all_batch_pairs(n, m, cap: int = ENUMERATION_CAP):
    """Every ordered pair of m-subsets, source-major in lexicographic order."""
    ns, nt = _sizes(n)
    total = count_batch_pairs((ns, nt), m)
    if total > cap:
        raise ResourceLimitError(f"{total} batch pairs exceed the enumeration cap {cap}")
    targets = [np.array(t) for t in itertools.combinations(range(nt), m)]
    return [(np.array(s), t) for s in itertools.combinations(range(ns), m) for t in targets]


def _require_uniform(measure: DiscreteMeasure, name: str):
    w = measure.weights
    if not np.allclose(w, 1.0 / w.size, rtol=0, atol=1e-12):
        raise InvalidInputError(f"{name} measure must have uniform weights 1/n")


def _solve_batch(source, target, pair, solver, metric):
    src, tgt = pair
    C = build_cost(source.points[src], target.points[tgt], metric)
    u_src = np.full(src.size, 1.0 / src.size)
    u_tgt = np.full(tgt.size, 1.0 / tgt.size)
    plan = solver.solve(u_src, u_tgt, C)
    return BatchRecord(src, tgt, plan.objective, plan.total_mass, plan.coupling, plan.converged)


def solve_pairs(source, target, pairs, solver: SolverKind, metric="euclidean", threads=1) -> list[BatchRecord]:
    """Solve every batch pair; results come back in pair order."""

    def run(item):
        idx, pair = item
        try:
            return _solve_batch(source, target, pair, solver, metric)
        except TransportError as exc:
            raise BatchSolveError(idx, exc) from exc

    items = list(enumerate(pairs))
    if threads is None or threads <= 1 or len(items) < 2:
        return [run(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, items))


def aggregate(records, shape, kind="ot") -> AggregatedResult:
    """Average per-batch costs and zero-padded plans in ascending batch order."""
    padded = np.zeros(shape)
    total = 0.0
    for rec in records:
        padded[np.ix_(rec.source, rec.target)] += rec.plan
        total += rec.objective
    k = len(records)
    return AggregatedResult(total / k, padded / k, list(records), kind)


def mb_transport(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    spec: BatchSpec,
    solver: SolverKind,
    metric: str = "euclidean",
    threads: int = 1,
) -> AggregatedResult:
    """Mini-batch estimator: mean batch cost and mean zero-padded plan."""
    _require_uniform(source, "source")
    _require_uniform(target, "target")
    pairs = sample_batches((source.size, target.size), spec)
    records = solve_pairs(source, target, pairs, solver, metric, threads)
    return aggregate(records, (source.size, target.size), solver.kind)


def full_mb_transport(source, target, m, solver: SolverKind, metric="euclidean", cap=ENUMERATION_CAP, threads=1):
    """Exact average over all ``C(n, m)^2`` ordered batch pairs."""
    _require_uniform(source, "source")
    _require_uniform(target, "target")
    pairs = all_batch_pairs((source.size, target.size), m, cap)
    records = solve_pairs(source, target, pairs, solver, metric, threads)
    return aggregate(records, (source.size, target.size), solver.kind)


def full_mb_pot(source, target, m, s, metric="euclidean", cap=ENUMERATION_CAP, threads=1) -> AggregatedResult:
    return full_mb_transport(source, target, m, SolverKind("pot", pot=PartialParams(s)), metric, cap, threads)


def two_stage_align(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    big_batch: int,
    small_batch: int,
    solver: SolverKind,
    seed: int = 0,
    metric: str = "euclidean",
) -> Alignment:
    """Solve one big (partial) OT, align rows by argmax, cut small blocks."""
    if solver.kind not in ("ot", "pot"):
        raise InvalidInputError("two-stage alignment supports kinds 'ot' and 'pot' only")
    n = min(source.size, target.size)
    if not (1 <= small_batch <= big_batch <= n):
        raise InvalidInputError(f"need 1 <= m ({small_batch}) <= big batch ({big_batch}) <= n ({n})")
    rng = batch_rng(seed, _ALIGN)
    src = np.sort(rng.choice(source.size, size=big_batch, replace=False))
    tgt = np.sort(rng.choice(target.size, size=big_batch, replace=False))
    C = build_cost(source.points[src], target.points[tgt], metric)
    u = np.full(big_batch, 1.0 / big_batch)
    plan = solver.solve(u, u, C).coupling

    local = np.argmax(plan, axis=1)
    local = np.where(plan.max(axis=1) > ABSENT_TOL, local, -1)
    gamma = np.where(local >= 0, tgt[np.maximum(local, 0)], -1)

    blocks = []
    for b in range(big_batch // small_batch):
        rows = np.arange(b * small_batch, (b + 1) * small_batch)
        cols = local[rows]
        sub = np.zeros((small_batch, small_batch))
        ok = cols >= 0
        sub[:, ok] = plan[np.ix_(rows, cols[ok])]
        blocks.append(AlignmentBlock(src[rows], gamma[rows], sub))
    return Alignment(src, tgt, gamma, plan, blocks)
