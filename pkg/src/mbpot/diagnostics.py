"""Brute-force oracle, misspecified-mapping census and concentration experiments."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import InvalidInputError, TransportPlan, as_cost, solve_ot_exact, build_cost
from .datasets import make_pair
from .errors import UnsupportedInstanceError
from .minibatch import (
    ABSENT_TOL,
    AggregatedResult,
    BatchSpec,
    SolverKind,
    all_batch_pairs,
    mb_transport,
    derive_seed,
    aggregate,
    sample_batches,
    solve_pairs,
)
from .partial import PartialParams

ORACLE_SIZE_CAP = 36
EXACT_THRESHOLD = 1e-9
ENTROPIC_THRESHOLD = 1e-4


def _common_denominator(values, cap):
    q = 1
    for x in values:
        frac = Fraction(float(x)).limit_denominator(cap)
        if abs(float(frac) - float(x)) > 1e-12:
            raise UnsupportedInstanceError(f"{x!r} is not a multiple of 1/q for any q <= {cap}")
        q = q * frac.denominator // math.gcd(q, frac.denominator)
        if q > cap:
            raise UnsupportedInstanceError(f"common denominator {q} exceeds cap {cap}")
    return q


def _row_vectors(caps, total):
    """All nonnegative integer vectors x <= caps with sum(x) == total."""
    if not caps:
        if total == 0:
            yield ()
        return
    head, rest = caps[0], caps[1:]
    room = sum(rest)
    for x in range(max(0, total - room), min(head, total) + 1):
        for tail in _row_vectors(rest, total - x):
            yield (x,) + tail


def brute_force_plan(a, b, C, s: float = 1.0, denominator_cap: int = 12) -> TransportPlan:
    """Exact minimizer over every plan with entries in multiples of ``1/q``.

    With ``s == 1`` the marginals are equalities; otherwise row and column
    sums are bounded by ``a`` and ``b`` and the total is ``s``. The
    constraint data are integral at granularity ``1/q`` and the constraint
    matrix is totally unimodular, so some optimal vertex lies on that grid
    and the exhaustive search is exact.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    C = as_cost(C)
    n, m = a.size, b.size
    if C.shape != (n, m):
        raise InvalidInputError(f"cost shape {C.shape} does not match weights ({n}, {m})")
    if n * m > ORACLE_SIZE_CAP:
        raise UnsupportedInstanceError(f"{n}x{m} instance exceeds the oracle size cap {ORACLE_SIZE_CAP}")
    if np.any(a < 0) or np.any(b < 0) or not (0 < s <= 1):
        raise InvalidInputError("weights must be nonnegative and s in (0, 1]")
    balanced = s == 1.0
    if balanced and abs(a.sum() - b.sum()) > 1e-9:
        raise InvalidInputError("balanced oracle needs equal masses")
    total_mass = a.sum() if balanced else s
    if not balanced and (s > a.sum() + 1e-12 or s > b.sum() + 1e-12):
        raise InvalidInputError("fraction exceeds the available mass")
    q = _common_denominator(list(a) + list(b) + [total_mass], denominator_cap)
    A = tuple(int(round(x * q)) for x in a)
    B = tuple(int(round(x * q)) for x in b)
    T = int(round(total_mass * q))
    Cq = C / q

    @lru_cache(maxsize=None)
    def best(i, caps, remaining):
        if i == n:
            if remaining != 0:
                return math.inf, ()
            return 0.0, ()
        if remaining > sum(A[i:]):
            return math.inf, ()
        sends = [A[i]] if balanced else range(0, min(A[i], remaining) + 1)
        choice = (math.inf, ())
        for r in sends:
            for x in _row_vectors(caps, r):
                row_cost = float(np.dot(Cq[i], x)) if r else 0.0
                rest_cost, rest = best(i + 1, tuple(c - v for c, v in zip(caps, x)), remaining - r)
                if row_cost + rest_cost < choice[0]:
                    choice = (row_cost + rest_cost, (x,) + rest)
        return choice

    cost, rows = best(0, B, T)
    best.cache_clear()
    if not math.isfinite(cost):
        raise UnsupportedInstanceError("no feasible plan on the 1/q grid")
    P = np.array(rows, dtype=float).reshape(n, m) / q
    return TransportPlan(P, float(P.sum()), float(np.sum(C * P)), "exact" if balanced else "pot_exact",
                         True, 0, {"denominator": q, "oracle": True})


@dataclass(frozen=True)
class MappingCensus:
    total: int
    misspecified: int
    optimal: int
    threshold: float

    def as_tuple(self):
        return self.total, self.misspecified, self.optimal


def mapping_census(candidate, reference, threshold: float = EXACT_THRESHOLD) -> MappingCensus:
    """Count candidate entries above ``threshold`` and split them by whether
    the reference (full OT) plan uses the same cell."""
    cand = candidate.padded_plan if isinstance(candidate, AggregatedResult) else candidate
    cand = cand.coupling if isinstance(cand, TransportPlan) else np.asarray(cand, dtype=float)
    ref = reference.coupling if isinstance(reference, TransportPlan) else np.asarray(reference, dtype=float)
    if cand.shape != ref.shape:
        raise InvalidInputError(f"shape mismatch: {cand.shape} vs {ref.shape}")
    used = cand > threshold
    total = int(used.sum())
    optimal = int(np.sum(used & (ref > ABSENT_TOL)))
    return MappingCensus(total, total - optimal, optimal, threshold)


def reference_plan(source, target, metric="euclidean") -> TransportPlan:
    """Exact full OT between the original measures."""
    return solve_ot_exact(source.weights, target.weights, build_cost(source, target, metric))


@dataclass(frozen=True)
class ConcentrationRow:
    k: int
    replicates: int
    mean: float
    std: float
    max_plan_row_deviation: float
    row_deviation: float = float("nan")
    col_deviation: float = float("nan")


@dataclass
class ConcentrationReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(ConcentrationRow.__dataclass_fields__)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for r in self.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, f) for f in names)])
        return buf.getvalue()

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        rows = [{k: clean(v) for k, v in asdict(r).items()} for r in self.rows]
        return json.dumps({"config": self.config, "rows": rows}, indent=2, sort_keys=True)


def concentration_value_experiment(
    n: int,
    m: int,
    s: float,
    k_grid,
    replicates: int,
    seed: int,
    distribution: str = "gaussian",
    metric: str = "euclidean",
    threads: int = 1,
    data=None,
) -> ConcentrationReport:
    """Spread of the m-POT value over fresh batch draws, for each k."""
    k_grid = [int(k) for k in k_grid]
    if k_grid != sorted(k_grid):
        raise InvalidInputError("k_grid must be ascending")
    source, target = data if data is not None else make_pair(distribution, n, seed)
    solver = SolverKind("pot", pot=PartialParams(s))
    report = ConcentrationReport(config=dict(kind="value", n=source.size, m=m, s=s, k_grid=k_grid,
                                             replicates=replicates, seed=seed, distribution=distribution,
                                             metric=metric))
    for k in k_grid:
        values = np.empty(replicates)
        for r in range(replicates):
            spec = BatchSpec(m, k, "with_replacement", derive_seed(seed, k, r))
            pairs = sample_batches((source.size, target.size), spec)
            records = solve_pairs(source, target, pairs, solver, metric, threads)
            values[r] = aggregate(records, (source.size, target.size), "pot").value
        std = float(values.std(ddof=1)) if replicates > 1 else 0.0
        report.rows.append(ConcentrationRow(k, replicates, float(values.mean()), std, float("nan")))
    return report


def concentration_plan_experiment(
    n: int,
    m: int,
    s: float,
    k_grid,
    replicates: int,
    seed: int,
    distribution: str = "gaussian",
    metric: str = "euclidean",
    threads: int = 1,
    data=None,
) -> ConcentrationReport:
    """Deviation of sampled padded-plan marginals from the full mini-batch plan's.

    Every ordered batch pair is solved once (the full estimator); sampled
    estimators reuse those per-pair plans. An entry ``"all"`` in ``k_grid``
    averages over every pair exactly once and so has zero deviation.
    """
    source, target = data if data is not None else make_pair(distribution, n, seed)
    shape = (source.size, target.size)
    pairs = all_batch_pairs(shape, m)
    solver = SolverKind("pot", pot=PartialParams(s))
    records = solve_pairs(source, target, pairs, solver, metric, threads)
    full = aggregate(records, shape, "pot")
    full_rows, full_cols = full.padded_plan.sum(axis=1), full.padded_plan.sum(axis=0)
    lookup = {(tuple(r.source), tuple(r.target)): i for i, r in enumerate(records)}

    if "all" in k_grid[:-1]:
        raise InvalidInputError("'all' must be the last k_grid entry")
    ks = [len(pairs) if k == "all" else int(k) for k in k_grid]
    numeric = [k for raw, k in zip(k_grid, ks) if raw != "all"]
    if numeric != sorted(numeric):
        raise InvalidInputError("k_grid must be ascending")
    report = ConcentrationReport(config=dict(kind="plan", n=source.size, m=m, s=s, k_grid=[str(k) for k in k_grid],
                                             replicates=replicates, seed=seed, distribution=distribution,
                                             metric=metric, full_value=full.value))
    for raw_k, k in zip(k_grid, ks):
        values, row_dev, col_dev = [], [], []
        for r in range(replicates):
            if raw_k == "all":
                chosen = records
            else:
                spec = BatchSpec(m, k, "with_replacement", derive_seed(seed, k, r))
                chosen = [records[lookup[(tuple(sp), tuple(tp))]] for sp, tp in sample_batches(shape, spec)]
            est = aggregate(chosen, shape, "pot")
            values.append(est.value)
            row_dev.append(np.abs(est.padded_plan.sum(axis=1) - full_rows).max())
            col_dev.append(np.abs(est.padded_plan.sum(axis=0) - full_cols).max())
        values = np.array(values)
        rd, cd = float(np.mean(row_dev)), float(np.mean(col_dev))
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        report.rows.append(ConcentrationRow(k, replicates, float(values.mean()), std, max(
            float(np.mean(np.maximum(row_dev, col_dev))), 0.0), rd, cd))
    return report


S_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class CensusComparison:
    ot: MappingCensus
    pot: MappingCensus
    best_s: float
    per_s: dict


def census_experiment(
    source,
    target,
    k: int,
    m: int,
    seed: int,
    s_grid=S_GRID,
    metric: str = "squared_euclidean",
    threads: int = 1,
) -> CensusComparison:
    """m-OT census against the m-POT census at its best ``s``.

    All solvers share the same batch draws. The best ``s`` has the fewest
    misspecified mappings among grid values that keep at least as many
    optimal mappings as m-OT (ties go to the larger ``s``); if none does,
    the ``s`` with the most optimal mappings wins.
    """
    ref = reference_plan(source, target, metric)
    spec = BatchSpec(m, k, "with_replacement", seed)
    ot = mapping_census(mb_transport(source, target, spec, SolverKind("ot"), metric, threads), ref)
    per_s = {}
    for s in s_grid:
        kind = SolverKind("pot", pot=PartialParams(s))
        per_s[float(s)] = mapping_census(mb_transport(source, target, spec, kind, metric, threads), ref)
    keeping = [s for s, c in per_s.items() if c.optimal >= ot.optimal]
    if keeping:
        best = min(keeping, key=lambda s: (per_s[s].misspecified, -s))
    else:
        best = max(per_s, key=lambda s: (per_s[s].optimal, -per_s[s].misspecified, s))
    return CensusComparison(ot, per_s[best], best, per_s)
