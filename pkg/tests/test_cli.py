import json
import subprocess
import sys

import numpy as np
import pytest

from mbpot.apps import ImageRGB
from mbpot.cli import main
from mbpot.core import DiscreteMeasure
from mbpot.datasets import EXAMPLE1_SOURCE, EXAMPLE1_TARGET
from mbpot.io import read_plan, read_ppm, write_points, write_ppm


@pytest.fixture
def clouds(tmp_path):
    write_points(tmp_path / "s.csv", DiscreteMeasure.uniform(EXAMPLE1_SOURCE))
    write_points(tmp_path / "t.csv", DiscreteMeasure.uniform(EXAMPLE1_TARGET))
    write_points(tmp_path / "bs.csv", DiscreteMeasure.uniform(EXAMPLE1_SOURCE[:3]))
    write_points(tmp_path / "bt.csv", DiscreteMeasure.uniform(EXAMPLE1_TARGET[2:]))
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


def test_solve_identical_clouds(clouds):
    out = clouds / "o"
    assert run("solve", "--source", clouds / "s.csv", "--target", clouds / "s.csv", "--out", out) == 0
    assert load(out / "summary.json")["objective"] == 0.0
    manifest = load(out / "manifest.json")
    assert manifest["subcommand"] == "solve" and manifest["exit_code"] == 0
    assert manifest["outputs"] == ["plan.csv", "summary.json"]


def test_solve_example1_batch(clouds):
    out = clouds / "o"
    assert run("solve", "--source", clouds / "bs.csv", "--target", clouds / "bt.csv", "--out", out) == 0
    P = read_plan(out / "plan.csv")
    assert np.count_nonzero(P) == 3
    np.testing.assert_allclose(P[P > 0], 1 / 3)


def test_pot_full_fraction_matches_ot(clouds):
    args = ["--source", clouds / "s.csv", "--target", clouds / "bt.csv"]
    write_points(clouds / "bt.csv", DiscreteMeasure.uniform(EXAMPLE1_TARGET[::-1]))
    assert run("solve", *args, "--out", clouds / "ot") == 0
    assert run("solve", *args, "--kind", "pot", "--s", "1.0", "--out", clouds / "pot") == 0
    a, b = load(clouds / "ot" / "summary.json"), load(clouds / "pot" / "summary.json")
    assert abs(a["objective"] - b["objective"]) <= 1e-9 and abs(a["mass"] - b["mass"]) <= 1e-9


def test_exit_codes(clouds, tmp_path):
    s, t = clouds / "s.csv", clouds / "t.csv"
    assert run("solve", "--source", s, "--target", t, "--kind", "pot", "--s", "1.5", "--out", tmp_path / "a") == 1
    assert load(tmp_path / "a" / "manifest.json")["exit_code"] == 1
    assert run("solve", "--source", s, "--out", tmp_path / "b") == 1
    assert run("frobnicate") == 1
    (tmp_path / "bad.csv").write_text("x,y\n1,nope\n")
    assert run("solve", "--source", tmp_path / "bad.csv", "--target", t, "--out", tmp_path / "c") == 2
    # C(30, 10)^2 batch pairs exceed the enumeration cap
    assert run("minibatch", "--distribution", "gaussian", "--n", "30", "--m", "10", "--enumerate",
               "--out", tmp_path / "d") == 4
    (tmp_path / "bad.ppm").write_bytes(b"not an image")
    assert run("color", "--source-image", tmp_path / "bad.ppm", "--target-image", tmp_path / "bad.ppm",
               "--k", "1", "--m", "1", "--seed", "0", "--out", tmp_path / "e") == 2
    assert run("flow", "--distribution", "s_curve", "--n", "5", "--out", tmp_path / "f") == 1


def test_solver_failure_exit_code(tmp_path):
    write_points(tmp_path / "a.csv", DiscreteMeasure.uniform([[0.0], [5.0]]))
    write_points(tmp_path / "b.csv", DiscreteMeasure.uniform([[1.0], [2.0]]))
    assert run("flow", "--init", tmp_path / "a.csv", "--target", tmp_path / "b.csv", "--k", "1", "--m", "2",
               "--lr", "1e200", "--steps", "5", "--eval-every", "1", "--seed", "0", "--out", tmp_path / "o") == 3
    assert "step" in load(tmp_path / "o" / "manifest.json")["error"]


def test_minibatch_full_batch_equals_solve(clouds):
    assert run("solve", "--source", clouds / "s.csv", "--target", clouds / "t.csv", "--out", clouds / "a") == 0
    assert run("minibatch", "--source", clouds / "s.csv", "--target", clouds / "t.csv", "--m", "5", "--k", "1",
               "--seed", "3", "--out", clouds / "b") == 0
    assert load(clouds / "b" / "value.json")["value"] == pytest.approx(load(clouds / "a" / "summary.json")["objective"])


def test_minibatch_requires_seed(clouds):
    assert run("minibatch", "--source", clouds / "s.csv", "--target", clouds / "t.csv", "--m", "2",
               "--out", clouds / "a") == 1


def test_enumerate_small(tmp_path):
    rng = np.random.default_rng(0)
    write_points(tmp_path / "s.csv", DiscreteMeasure.uniform(rng.random((4, 2))))
    write_points(tmp_path / "t.csv", DiscreteMeasure.uniform(rng.random((4, 2))))
    assert run("minibatch", "--source", tmp_path / "s.csv", "--target", tmp_path / "t.csv", "--m", "2",
               "--enumerate", "--kind", "pot", "--s", "1", "--out", tmp_path / "o") == 0
    assert load(tmp_path / "o" / "value.json")["batches"] == 36


def test_two_stage_diagonal(tmp_path):
    pts = np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [30.0, 0.0]])
    write_points(tmp_path / "s.csv", DiscreteMeasure.uniform(pts))
    write_points(tmp_path / "t.csv", DiscreteMeasure.uniform(pts + 0.1))
    assert run("minibatch", "--source", tmp_path / "s.csv", "--target", tmp_path / "t.csv", "--m", "2",
               "--two-stage", "--big-batch", "4", "--seed", "0", "--out", tmp_path / "o") == 0
    lines = (tmp_path / "o" / "gamma.csv").read_text().split()
    assert [l.split(",")[1] for l in lines[1:]] == ["0", "1", "2", "3"]
    assert (tmp_path / "o" / "block_0001.csv").exists()


def test_census_example1(clouds):
    assert run("census", "--source", clouds / "s.csv", "--target", clouds / "t.csv", "--batch-source", "0,1,2",
               "--batch-target", "2,3,4", "--out", clouds / "o") == 0
    c = load(clouds / "o" / "census.json")
    assert (c["total"], c["misspecified"], c["optimal"]) == (3, 3, 0)


def test_census_compare_and_concentration(tmp_path):
    assert run("census", "--distribution", "bimodal", "--n", "10", "--compare", "--m", "6", "--k", "8",
               "--seed", "1", "--metric", "squared_euclidean", "--out", tmp_path / "c") == 0
    assert "best_s" in load(tmp_path / "c" / "census.json")
    assert run("concentration", "--mode", "plan", "--n", "5", "--m", "2", "--s", "0.5", "--k-grid", "4,all",
               "--replicates", "2", "--seed", "0", "--out", tmp_path / "p") == 0
    assert (tmp_path / "p" / "report.csv").read_text().count("\n") == 3


def test_flow_zero_lr_snapshots_identical(tmp_path):
    assert run("flow", "--distribution", "s_curve", "--n", "20", "--lr", "0", "--steps", "6", "--eval-every", "3",
               "--seed", "2", "--out", tmp_path) == 0
    snaps = sorted((tmp_path / "snapshots").iterdir())
    assert len(snaps) == 3
    assert snaps[0].read_bytes() == snaps[-1].read_bytes()


def test_color_self_transfer(tmp_path):
    rng = np.random.default_rng(0)
    img = ImageRGB(8, 8, rng.integers(0, 256, (64, 3)) / 255)
    write_ppm(tmp_path / "a.ppm", img)
    assert run("color", "--source-image", tmp_path / "a.ppm", "--target-image", tmp_path / "a.ppm", "--k", "1",
               "--m", "64", "--seed", "0", "--out", tmp_path / "o") == 0
    out = read_ppm(tmp_path / "o" / "output.ppm")
    assert np.abs(out.pixels - img.pixels).max() <= 1 / 255
    assert load(tmp_path / "o" / "summary.json")["unmodified"] == 0


def test_module_entry_point(clouds):
    proc = subprocess.run([sys.executable, "-m", "mbpot", "solve", "--source", str(clouds / "s.csv"), "--target",
                           str(clouds / "t.csv"), "--out", str(clouds / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "mbpot", "--version"], capture_output=True, text=True)
    assert proc.stdout.strip() == "0.1.0"
