import numpy as np
import pytest
from hypothesis import given, strategies as st

from mbpot.apps import (
    ImageRGB,
    IterationError,
    batch_cost_gradient,
    color_transfer,
    fixed_plan_batch_cost,
    gradient_flow,
)
from mbpot.core import DiscreteMeasure, InvalidInputError, build_cost, solve_ot_exact
from mbpot.datasets import flow_pair
from mbpot.minibatch import SolverKind
from mbpot.partial import PartialParams


def synthetic_image(w, h, seed):
    rng = np.random.default_rng(seed)
    return ImageRGB(w, h, rng.random((w * h, 3)))


def test_two_pixel_matching():
    src = ImageRGB(2, 1, [[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]])
    tgt = ImageRGB(2, 1, [[1.0, 0.8, 0.7], [0.0, 0.2, 0.3]])
    out = color_transfer(src, tgt, 1, 2, SolverKind("ot"), seed=0)
    np.testing.assert_allclose(out.pixels, [[0.0, 0.2, 0.3], [1.0, 0.8, 0.7]])


def test_self_transfer_identity():
    img = synthetic_image(6, 5, 1)
    out = color_transfer(img, img, 1, img.size, SolverKind("ot"), seed=3)
    np.testing.assert_allclose(out.pixels, img.pixels, atol=1e-12)


def test_unvisited_pixels_keep_color():
    src, tgt = synthetic_image(8, 8, 2), synthetic_image(8, 8, 3)
    out, visits = color_transfer(src, tgt, 2, 4, SolverKind("ot"), seed=0, return_visits=True)
    keep = visits == 0
    assert keep.sum() >= 64 - 8
    np.testing.assert_array_equal(out.pixels[keep], src.pixels[keep])
    assert out.pixels.min() >= 0 and out.pixels.max() <= 1


def test_lower_s_leaves_more_pixels():
    src, tgt = synthetic_image(10, 10, 4), synthetic_image(10, 10, 5)
    counts = []
    for s in (0.5, 0.9, 1.0):
        _, visits = color_transfer(src, tgt, 20, 10, SolverKind("pot", pot=PartialParams(s)), 0, return_visits=True)
        counts.append(int(np.sum(visits == 0)))
    assert counts[0] >= counts[1] >= counts[2]


def test_color_transfer_validation():
    img = synthetic_image(2, 2, 0)
    with pytest.raises(InvalidInputError):
        color_transfer(img, img, 1, 5, SolverKind("ot"), 0)
    with pytest.raises(InvalidInputError):
        color_transfer(img, img, 0, 2, SolverKind("ot"), 0)
    with pytest.raises(InvalidInputError):
        ImageRGB(2, 2, np.zeros((3, 3)))
    assert ImageRGB(1, 1, [[2.0, -1.0, 0.5]]).pixels.tolist() == [[1.0, 0.0, 0.5]]


def test_image_array_round_trip():
    arr = np.random.default_rng(0).random((3, 4, 3))
    img = ImageRGB.from_array(arr)
    assert (img.width, img.height) == (4, 3)
    np.testing.assert_array_equal(img.to_array(), arr)


def finite_difference(X, Y, plan, h=1e-6):
    g = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        Xp, Xm = X.copy(), X.copy()
        Xp[idx] += h
        Xm[idx] -= h
        g[idx] = (fixed_plan_batch_cost(Xp, Y, plan) - fixed_plan_batch_cost(Xm, Y, plan)) / (2 * h)
    return g


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10**6))
def test_gradient_matches_finite_differences(n, m, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((n, 2)), rng.standard_normal((m, 2))
    a, b = np.full(n, 1 / n), np.full(m, 1 / m)
    plan = solve_ot_exact(a, b, build_cost(X, Y, "squared_euclidean")).coupling
    g = batch_cost_gradient(X, Y, plan)
    fd = finite_difference(X, Y, plan)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


def test_single_point_recursion():
    x0, y = np.array([[2.0, -1.0]]), np.array([[0.5, 0.5]])
    lr, steps = 0.05, 30
    traj = gradient_flow(DiscreteMeasure.uniform(x0), DiscreteMeasure.uniform(y), SolverKind("ot"),
                         1, 1, lr, steps, seed=0, eval_every=10)
    expected = y + (x0 - y) * (1 - 2 * lr) ** steps
    np.testing.assert_allclose(traj.snapshots[-1][1], expected, atol=1e-12)
    assert [s for s, _ in traj.w2_curve] == [0, 10, 20, 30]


def test_zero_learning_rate_is_constant():
    init, tgt = flow_pair(30, 0)
    traj = gradient_flow(init, tgt, SolverKind("ot"), 2, 4, 0.0, 20, seed=1, eval_every=5)
    for _, X in traj.snapshots:
        np.testing.assert_array_equal(X, init.points)
    assert len({w for _, w in traj.w2_curve}) == 1


def test_full_batch_flow_descends():
    init, tgt = flow_pair(60, 1)
    traj = gradient_flow(init, tgt, SolverKind("ot"), 1, 60, 0.001, 100, seed=0, eval_every=10)
    w2 = [w for _, w in traj.w2_curve]
    assert all(b <= a + 1e-12 for a, b in zip(w2, w2[1:]))
    assert w2[-1] < w2[0]


def test_flow_deterministic():
    init, tgt = flow_pair(40, 2)
    kind = SolverKind("pot", pot=PartialParams(0.8))
    t1 = gradient_flow(init, tgt, kind, 4, 4, 0.001, 50, seed=9, eval_every=25)
    t2 = gradient_flow(init, tgt, kind, 4, 4, 0.001, 50, seed=9, eval_every=25, threads=3)
    np.testing.assert_array_equal(t1.snapshots[-1][1], t2.snapshots[-1][1])
    assert t1.w2_curve == t2.w2_curve


def test_divergent_flow_reports_step():
    init, tgt = flow_pair(10, 3)
    with pytest.raises(IterationError) as info:
        gradient_flow(init, tgt, SolverKind("ot"), 1, 10, 1e200, 10, seed=0, eval_every=1)
    assert info.value.step >= 1
