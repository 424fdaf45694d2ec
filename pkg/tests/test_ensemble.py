import json

import numpy as np
import pytest

from eljunction.config import AnalysisToggles, parse_config_text
from eljunction.ensemble import (
    MANIFEST,
    EnsembleAggregate,
    derive_seed,
    is_complete,
    resolve_workers,
    run_ensemble,
)
from eljunction.errors import ValidationError
from eljunction.io import read_columns, sha256

SMALL = """
[model]
L = 8
M = 4
N = [1, 2]
W = [1.0, 10.0]
[ensemble]
realizations = 3
base_seed = 11
workers = 1
[classical]
n_omega = 12
n_g1 = 5
orbits = 2
n_periods = 10
[spectroscopy]
Q = 120
"""

QUIET = AnalysisToggles(classical=False, spectroscopy=False, jw=False)

NUMERIC = [
    "quasienergies.csv", "pr.csv", "rstats.csv", "degrees.csv", "density.csv", "graph.dot",
    "chart.csv", "poincare.csv", "spectrum.csv", "peaks.csv", "spin_table.csv", "summary.csv",
    "fermion_heff.csv", "z_fields.csv",
]


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    return run_ensemble(parse_config_text(SMALL), out=out, run_id="a")


def test_seed_derivation_stable():
    assert derive_seed(0, 0) == derive_seed(0, 0)
    seeds = {derive_seed(5, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert derive_seed(5, 1) != derive_seed(6, 1)


def test_worker_resolution(monkeypatch):
    monkeypatch.delenv("ELJUNCTION_WORKERS", raising=False)
    assert resolve_workers(3) == 3
    assert resolve_workers(0) >= 1
    monkeypatch.setenv("ELJUNCTION_WORKERS", "2")
    assert resolve_workers(7) == 2
    monkeypatch.setenv("ELJUNCTION_WORKERS", "zero")
    with pytest.raises(ValidationError):
        resolve_workers()


def test_output_tree(small_run):
    d = small_run.directory
    assert small_run.ok
    assert is_complete(d)
    for name in NUMERIC:
        assert (d / name).is_file(), name
    manifest = json.loads((d / MANIFEST).read_text())
    assert manifest["status"] == "complete"
    assert len(manifest["seeds"]) == 3
    assert manifest["seeds"][0] == derive_seed(11, 0)
    assert manifest["config"]["model"]["omega"] == pytest.approx(small_run.manifest["config"]["model"]["omega"])
    for name, digest in manifest["files"].items():
        assert sha256(d / name) == digest


def test_aggregates_consistent_with_files(small_run):
    d = small_run.directory
    dens = read_columns(d / "density.csv")
    summary = read_columns(d / "summary.csv")
    for row in range(len(summary["N"])):
        N, W = summary["N"][row], summary["W"][row]
        sel = (dens["N"] == N) & (dens["W"] == W)
        assert summary["mean_density"][row] == pytest.approx(dens["density"][sel].mean())
        assert summary["realizations"][row] == 3
    deg = read_columns(d / "degrees.csv")
    sel = (deg["N"] == 2) & (deg["W"] == 1)
    assert deg["count"][sel].sum() == 3 * 36


def test_quasienergies_in_zone(small_run):
    q = read_columns(small_run.directory / "quasienergies.csv")
    omega = small_run.manifest["config"]["model"]["omega"]
    assert np.all(np.abs(q["eps"]) <= omega / 2)
    assert len(q["eps"]) == 3 * 2 * (8 + 36)


def test_byte_identical_reruns(small_run, tmp_path):
    again = run_ensemble(parse_config_text(SMALL), out=tmp_path, run_id="b")
    for name in NUMERIC:
        assert (small_run.directory / name).read_bytes() == (again.directory / name).read_bytes(), name


def test_pool_matches_serial(small_run, tmp_path):
    cfg = parse_config_text(SMALL.replace("workers = 1", "workers = 2"))
    pooled = run_ensemble(cfg.replace(analysis=QUIET), out=tmp_path, run_id="p")
    for name in ("quasienergies.csv", "density.csv", "degrees.csv", "rstats.csv", "pr.csv"):
        assert (small_run.directory / name).read_bytes() == (pooled.directory / name).read_bytes(), name


def test_floquet_only_run(tmp_path):
    cfg = parse_config_text(
        "[model]\nL = 8\nM = 4\n[ensemble]\nrealizations = 1\n[analysis]\n"
        "pr = false\nrstats = false\ngraph = false\nclassical = false\nspectroscopy = false\njw = false\n"
    )
    run = run_ensemble(cfg, out=tmp_path, run_id="f")
    names = {p.name for p in run.directory.iterdir()}
    assert {"quasienergies.csv", MANIFEST} <= names
    assert not names & {"pr.csv", "graph.dot", "chart.csv", "spectrum.csv"}


def test_failures_recorded_and_run_continues(tmp_path):
    cfg = parse_config_text(
        "[model]\nL = 8\nM = 4\n[ensemble]\nrealizations = 2\n[propagator]\nunitarity_tol = 1e-30\n"
        "[analysis]\nclassical = false\nspectroscopy = false\njw = false\n"
    )
    run = run_ensemble(cfg, out=tmp_path, run_id="x")
    assert not run.ok
    assert len(run.failures) == 4
    assert "NumericalToleranceError" in run.failures[0]["error"]
    assert run.manifest["status"] == "failed-realizations"
    assert is_complete(run.directory)


def test_stale_manifest_removed_first(tmp_path):
    d = tmp_path / "r"
    d.mkdir()
    (d / MANIFEST).write_text("{}")
    cfg = parse_config_text("[model]\nL = 8\nM = 4\n[ensemble]\nrealizations = 1\n")
    run = run_ensemble(cfg.replace(analysis=QUIET), out=tmp_path, run_id="r")
    assert json.loads((d / MANIFEST).read_text())["run_id"] == "r"
    assert run.ok


def test_incomplete_directory_detected(tmp_path):
    assert not is_complete(tmp_path)


def test_aggregate_merge_matches_sequential(small_run):
    results = [r for r in small_run.results if (r.N, r.W) == (2, 1.0)]
    whole = EnsembleAggregate.empty(2, 1.0, 36)
    for r in results:
        whole.add(r)
    a = EnsembleAggregate.empty(2, 1.0, 36).add(results[0])
    b = EnsembleAggregate.empty(2, 1.0, 36).add(results[1]).add(results[2])
    merged = a.merge(b)
    np.testing.assert_array_equal(merged.degree_hist.counts, whole.degree_hist.counts)
    np.testing.assert_array_equal(merged.r_hist.counts, whole.r_hist.counts)
    assert merged.mean_density == whole.mean_density
    np.testing.assert_array_equal(merged.mean_pr, whole.mean_pr)
    with pytest.raises(ValidationError):
        a.merge(EnsembleAggregate.empty(1, 1.0, 8))
