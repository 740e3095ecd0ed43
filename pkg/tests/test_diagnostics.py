import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mbpot.core import build_cost
from mbpot.datasets import EXAMPLE1_BATCH, bimodal_pair, example1, make_pair
from mbpot.diagnostics import (
    S_GRID,
    brute_force_plan,
    census_experiment,
    concentration_plan_experiment,
    concentration_value_experiment,
    mapping_census,
    reference_plan,
)
from mbpot.errors import InvalidInputError, UnsupportedInstanceError
from mbpot.minibatch import SolverKind, aggregate, solve_pairs
from mbpot.partial import PartialParams


def permutation_oracle(C):
    # uniform square OT attains its optimum at a permutation
    n = C.shape[0]
    return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))) / n


def test_brute_force_against_permutations():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 4, 5):
        C = rng.random((n, n))
        u = np.full(n, 1.0 / n)
        assert brute_force_plan(u, u, C).objective == pytest.approx(permutation_oracle(C), abs=1e-12)


def test_brute_force_partial_frozen():
    # s = 1/4 moves the single cheapest cell
    C = np.array([[3.0, 1.0], [2.0, 5.0]])
    P = brute_force_plan([0.5, 0.5], [0.5, 0.5], C, 0.25)
    assert P.objective == pytest.approx(0.25)
    assert P.coupling[0, 1] == pytest.approx(0.25)


def test_brute_force_limits():
    with pytest.raises(UnsupportedInstanceError):
        brute_force_plan(np.full(7, 1 / 7), np.full(7, 1 / 7), np.zeros((7, 7)))
    with pytest.raises(UnsupportedInstanceError):
        brute_force_plan([1 / np.pi, 1 - 1 / np.pi], [0.5, 0.5], np.zeros((2, 2)))


def test_example1_census():
    src, tgt = example1()
    recs = solve_pairs(src, tgt, [EXAMPLE1_BATCH], SolverKind("ot"))
    agg = aggregate(recs, (5, 5))
    assert mapping_census(agg, reference_plan(src, tgt)).as_tuple() == (3, 3, 0)
    # POT with s = 1/3 keeps the one correct mapping
    recs = solve_pairs(src, tgt, [EXAMPLE1_BATCH], SolverKind("pot", pot=PartialParams(1 / 3)))
    assert mapping_census(aggregate(recs, (5, 5)), reference_plan(src, tgt)).as_tuple() == (1, 0, 1)


def test_census_shape_check():
    with pytest.raises(InvalidInputError):
        mapping_census(np.zeros((2, 2)), np.zeros((3, 3)))


def test_bimodal_census_ordering_single_seed():
    src, tgt = bimodal_pair(10, 0)
    comp = census_experiment(src, tgt, 32, 6, seed=0)
    assert comp.best_s in S_GRID
    assert comp.pot.misspecified < comp.ot.misspecified
    assert comp.ot.total == comp.ot.misspecified + comp.ot.optimal


def test_value_experiment_shrinks():
    rep = concentration_value_experiment(20, 4, 0.5, [1, 8], 30, seed=0)
    std = rep.column("std")
    assert std[1] < std[0]
    assert json.loads(rep.to_json())["rows"][0]["max_plan_row_deviation"] is None
    assert rep.to_csv().splitlines()[0].startswith("k,replicates,mean")
    with pytest.raises(InvalidInputError):
        concentration_value_experiment(20, 4, 0.5, [8, 1], 3, seed=0)


def test_plan_experiment_full_is_exact():
    rep = concentration_plan_experiment(5, 2, 0.5, [4, 64, "all"], 3, seed=1)
    dev = rep.column("max_plan_row_deviation")
    assert dev[-1] == pytest.approx(0.0, abs=1e-15)
    assert dev[0] > dev[1]


def test_make_pair_names():
    for name in ("gaussian", "bimodal", "example1", "s_curve"):
        s, t = make_pair(name, 6, 0)
        assert s.size == t.size
    with pytest.raises(InvalidInputError):
        make_pair("moons", 5)


@given(st.integers(0, 10**6), st.floats(1e-12, 0.1), st.floats(1e-12, 0.1))
def test_census_conservation_and_threshold(seed, t1, t2):
    rng = np.random.default_rng(seed)
    cand = rng.random((5, 5)) * (rng.random((5, 5)) < 0.5)
    ref = np.eye(5) * 0.2
    lo, hi = sorted((t1, t2))
    c_lo, c_hi = mapping_census(cand, ref, lo), mapping_census(cand, ref, hi)
    assert c_lo.total == c_lo.misspecified + c_lo.optimal
    assert c_hi.total <= c_lo.total
    assert c_hi.misspecified <= c_lo.misspecified


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6), st.sampled_from([0.25, 0.5, 0.75, 1.0]))
def test_brute_force_feasibility(n, m, seed, s):
    rng = np.random.default_rng(seed)
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    C = rng.random((n, m))
    P = brute_force_plan(a, b, C, s)
    assert P.coupling.sum() == pytest.approx(s)
    assert np.all(P.row_sums <= a + 1e-12) and np.all(P.col_sums <= b + 1e-12)
