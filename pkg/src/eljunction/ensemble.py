"""Disorder-ensemble orchestration and the on-disk run layout.

Each realization i gets its own seed, derived from the base seed by a
keyed 64-bit BLAKE2b hash, so any single realization can be rerun alone.
Work fans out over a process pool; results are merged strictly in
(N, W, i) order so the output bytes do not depend on scheduling.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import enumerate_basis
from .classical import poincare_section, stability_chart
from .config import RunConfig
from .errors import ValidationError
from .floquet import floquet_analysis
from .graph import DegreeHistogram, adjacency, degrees, density, export_graph
from .io import matrix_rows, sha256, write_csv
from .jw import fermion_floquet_effective, spin_coupling_report
from .model import DisorderRealization
from .spectral import RHistogram, participation_ratio, reference_distributions, r_statistics
from .spectroscopy import run_spectroscopy

WORKERS_ENV = "ELJUNCTION_WORKERS"
MANIFEST = "manifest.json"
_SEED_KEY = b"eljunction-seed"


def derive_seed(base_seed: int, i: int) -> int:
    """seed_i = first 8 bytes (little endian) of BLAKE2b(key, base_seed || i)."""
    h = hashlib.blake2b(struct.pack("<QQ", base_seed & (2**64 - 1), i), digest_size=8, key=_SEED_KEY)
    return int.from_bytes(h.digest(), "little")


def resolve_workers(requested: int = 0) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(WORKERS_ENV, f"expected an integer, got {env!r}") from None
        if n < 1:
            raise ValidationError(WORKERS_ENV, f"must be >= 1, got {n}")
        return n
    if requested > 0:
        return requested
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


@dataclass
class RealizationResult:
    N: int
    W: float
    index: int
    seed: int
    eps: np.ndarray
    pr: np.ndarray | None = None
    r: np.ndarray | None = None
    degrees: np.ndarray | None = None
    density: float | None = None
    H_eff: np.ndarray | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class _Task:
    N: int
    W: float
    index: int
    seed: int
    keep_heff: bool


def run_realization(config: RunConfig, task: _Task) -> RealizationResult:
    """Full per-realization pipeline; failures come back as data, not exceptions."""
    try:
        params = config.params(task.N, task.W)
        disorder = DisorderRealization.draw(task.seed, task.W, params.M)
        res = floquet_analysis(params, disorder, config.propagator)
        out = RealizationResult(task.N, task.W, task.index, task.seed, eps=res.quasienergies)
        toggles = config.analysis
        if toggles.pr:
            out.pr = participation_ratio(res.modes, toggles.pr_mode)
        if toggles.rstats and res.dimension >= 3:
            out.r = r_statistics(np.sort(res.quasienergies))
        if toggles.graph and res.dimension >= 2:
            a = adjacency(res.H_eff, toggles.cutoff)
            out.degrees = degrees(a)
            out.density = density(a)
        if task.keep_heff:
            out.H_eff = res.H_eff
        return out
    except Exception as exc:  # recorded in the manifest
        msg = f"{type(exc).__name__}: {exc}"
        return RealizationResult(task.N, task.W, task.index, task.seed, eps=np.empty(0), error=msg)


def _worker(args):
    config, task = args
    return run_realization(config, task)


def _exact_mean(values) -> float:
    # fsum is correctly rounded, so the result does not depend on grouping or order
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


@dataclass
class EnsembleAggregate:
    """Merged statistics for one (N, W).

    Histograms hold integer counts; means are taken with a correctly rounded
    sum over the stored per-realization values, so any merge grouping gives
    bit-identical results.
    """

    N: int
    W: float
    D: int
    degree_hist: DegreeHistogram
    r_hist: RHistogram
    densities: list = field(default_factory=list)
    r_values: list = field(default_factory=list)
    pr_rows: list = field(default_factory=list)
    count: int = 0

    @classmethod
    def empty(cls, N: int, W: float, D: int, r_bins: int = 20) -> "EnsembleAggregate":
        return cls(N, W, D, DegreeHistogram.empty(D), RHistogram.empty(r_bins))

    def add(self, res: RealizationResult) -> "EnsembleAggregate":
        if res.failed:
            return self
        if res.degrees is not None:
            self.degree_hist.counts = self.degree_hist.counts + np.bincount(res.degrees, minlength=self.D)
            self.degree_hist.graphs += 1
            self.densities.append(res.density)
        if res.r is not None:
            self.r_hist.add(res.r)
            self.r_values.append(np.asarray(res.r))
        if res.pr is not None:
            self.pr_rows.append(np.asarray(res.pr))
        self.count += 1
        return self

    def merge(self, other: "EnsembleAggregate") -> "EnsembleAggregate":
        if (self.N, self.W, self.D) != (other.N, other.W, other.D):
            raise ValidationError("aggregate", "cannot merge aggregates of different (N, W)")
        return EnsembleAggregate(
            self.N,
            self.W,
            self.D,
            self.degree_hist.merge(other.degree_hist),
            self.r_hist.merge(other.r_hist),
            self.densities + other.densities,
            self.r_values + other.r_values,
            self.pr_rows + other.pr_rows,
            self.count + other.count,
        )

    @property
    def mean_density(self) -> float:
        return _exact_mean(self.densities)

    @property
    def std_density(self) -> float:
        if not self.densities:
            return float("nan")
        m = self.mean_density
        return math.sqrt(_exact_mean((d - m) ** 2 for d in self.densities))

    @property
    def mean_r(self) -> float:
        return _exact_mean(np.concatenate(self.r_values)) if self.r_values else float("nan")

    @property
    def stderr_r(self) -> float:
        if not self.r_values:
            return float("nan")
        r = np.concatenate(self.r_values)
        if r.size < 2:
            return float("nan")
        m = self.mean_r
        return math.sqrt(math.fsum((r - m) ** 2) / (r.size - 1) / r.size)

    @property
    def mean_pr(self) -> np.ndarray:
        if not self.pr_rows:
            return np.full(self.D, np.nan)
        rows = np.array(self.pr_rows)
        return np.array([_exact_mean(rows[:, l]) for l in range(self.D)])


@dataclass
class EnsembleRun:
    directory: Path
    manifest: dict
    aggregates: dict
    results: list

    @property
    def failures(self) -> list:
        return self.manifest["failures"]

    @property
    def ok(self) -> bool:
        return not self.failures


def default_run_id(config: RunConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return "run-" + hashlib.sha256(blob).hexdigest()[:12]


def _tasks(config: RunConfig):
    first = config.combinations()[0]
    return [
        _Task(N, W, i, derive_seed(config.ensemble.base_seed, i), keep_heff=(i == 0 and (N, W) == first))
        for N, W in config.combinations()
        for i in range(config.ensemble.realizations)
    ]


def _execute(config: RunConfig, tasks, workers: int) -> list:
    jobs = [(config, t) for t in tasks]
    if workers <= 1:
        return [_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, whatever the completion order
        return list(pool.map(_worker, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def run_ensemble(config: RunConfig, out: str | Path | None = None, run_id: str | None = None) -> EnsembleRun:
    """Run every (N, W, realization), write CSVs, then the manifest."""
    started = time.time()
    root = Path(out if out is not None else config.out)
    run_dir = root / (run_id or default_run_id(config))
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / MANIFEST
    if manifest_path.exists():
        manifest_path.unlink()  # the directory is incomplete until the new manifest lands

    workers = resolve_workers(config.ensemble.workers)
    tasks = _tasks(config)
    results = _execute(config, tasks, workers)

    aggregates = {}
    for N, W in config.combinations():
        D = len(enumerate_basis(N, config.model.L))
        aggregates[(N, W)] = EnsembleAggregate.empty(N, W, D, config.analysis.r_bins)
    for res in results:
        aggregates[(res.N, res.W)].add(res)

    failures = [
        {"N": r.N, "W": r.W, "realization": r.index, "seed": r.seed, "error": r.error} for r in results if r.failed
    ]
    files = _write_outputs(config, run_dir, results, aggregates, failures)

    finished = time.time()
    manifest = {
        "format": 1,
        "run_id": run_dir.name,
        "status": "complete" if not failures else "failed-realizations",
        "software": _software(),
        "config": config.to_dict(),
        "seeds": [derive_seed(config.ensemble.base_seed, i) for i in range(config.ensemble.realizations)],
        "seed_derivation": "blake2b(key='eljunction-seed', pack('<QQ', base_seed, i), digest_size=8), little endian",
        "workers": workers,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.fromtimestamp(finished, timezone.utc).isoformat(),
        "wall_clock_s": finished - started,
        "failures": failures,
        "files": {name: sha256(run_dir / name) for name in sorted(files)},
    }
    tmp = run_dir / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(manifest_path)
    return EnsembleRun(run_dir, manifest, aggregates, results)


def is_complete(run_dir) -> bool:
    return (Path(run_dir) / MANIFEST).is_file()


def _software() -> dict:
    import networkx
    import scipy

    return {
        "eljunction": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
    }


def _write_outputs(config, run_dir: Path, results, aggregates, failures) -> list[str]:
    files = []

    def emit(name, header, rows):
        write_csv(run_dir / name, header, rows)
        files.append(name)

    ok = [r for r in results if not r.failed]
    emit(
        "quasienergies.csv",
        ["N", "W", "realization", "seed", "mu", "eps"],
        ((r.N, r.W, r.index, r.seed, mu + 1, e) for r in ok for mu, e in enumerate(r.eps)),
    )
    toggles = config.analysis
    if toggles.pr:
        emit(
            "pr.csv",
            ["N", "W", "l", "mean_pr", "realizations"],
            ((a.N, a.W, l + 1, v, len(a.pr_rows)) for a in aggregates.values() for l, v in enumerate(a.mean_pr)),
        )
    if toggles.rstats:
        rows = []
        for a in aggregates.values():
            h = a.r_hist
            goe, poi = reference_distributions(h.centers)
            for b in range(len(h.counts)):
                rows.append((a.N, a.W, h.edges[b], h.edges[b + 1], h.counts[b], h.density[b], goe[b], poi[b]))
        emit("rstats.csv", ["N", "W", "r_lo", "r_hi", "count", "density", "p_goe", "p_poisson"], rows)
    if toggles.graph:
        emit(
            "degrees.csv",
            ["N", "W", "K", "count", "probability"],
            (
                (a.N, a.W, K, c, c / max(a.degree_hist.counts.sum(), 1))
                for a in aggregates.values()
                for K, c in enumerate(a.degree_hist.counts)
            ),
        )
        emit(
            "density.csv",
            ["N", "W", "realization", "seed", "density"],
            ((r.N, r.W, r.index, r.seed, r.density) for r in ok if r.density is not None),
        )
        keep = next((r for r in ok if r.H_eff is not None), None)
        if keep is not None:
            basis = enumerate_basis(keep.N, config.model.L)
            labels = [basis.label(l) for l in range(1, len(basis) + 1)]
            export_graph(adjacency(keep.H_eff, toggles.cutoff), run_dir / "graph.dot", keep.H_eff, labels=labels)
            files.append("graph.dot")
    emit("summary.csv", *_summary(aggregates, failures))
    if toggles.classical:
        files += write_classical(config, run_dir)
    if toggles.spectroscopy:
        files += write_spectroscopy(config, run_dir)
    if toggles.jw:
        files += write_jw(config, run_dir)
    return files


def _summary(aggregates, failures):
    failed = {}
    for f in failures:
        failed[(f["N"], f["W"])] = failed.get((f["N"], f["W"]), 0) + 1
    rows = []
    for (N, W), a in aggregates.items():
        h, d = a.r_hist, a.degree_hist
        has_graph = d.counts.sum() > 0
        rows.append(
            (
                N,
                W,
                a.count,
                failed.get((N, W), 0),
                h.n,
                a.mean_r,
                a.stderr_r,
                a.mean_density,
                a.std_density,
                d.mean if has_graph else float("nan"),
                d.variance if has_graph else float("nan"),
            )
        )
    header = [
        "N",
        "W",
        "realizations",
        "failed",
        "n_r",
        "mean_r",
        "stderr_r",
        "mean_density",
        "std_density",
        "mean_degree",
        "var_degree",
    ]
    return header, rows


def default_orbit_starts(config: RunConfig):
    """Orbits launched on k = 0 between the fixed point and the separatrix."""
    M = config.model.M
    n = config.classical.orbits
    return [(M + 0.5 * M * (j + 0.5) / n, 0.0) for j in range(n)]


def write_classical(config: RunConfig, run_dir: Path) -> list[str]:
    c = config.classical
    grid = stability_chart(c.omega_range, c.g1_range, config.model, c.n_omega, c.n_g1)
    rows = (
        (grid.omega_axis[j], grid.g1_axis[i], grid.trace[i, j], int(grid.stable[i, j]), grid.det[i, j])
        for i in range(len(grid.g1_axis))
        for j in range(len(grid.omega_axis))
    )
    write_csv(run_dir / "chart.csv", ["omega", "g1", "trace", "stable", "det"], rows)
    files = ["chart.csv"]
    if c.orbits:
        orbits = poincare_section(default_orbit_starts(config), c.n_periods, config.model)
        rows = ((o + 1, n, x, k) for o, orb in enumerate(orbits) for n, (x, k) in enumerate(orb))
        write_csv(run_dir / "poincare.csv", ["orbit_id", "n", "x", "k"], rows)
        files.append("poincare.csv")
    return files


def write_spectroscopy(config: RunConfig, run_dir: Path) -> list[str]:
    s = config.spectroscopy
    spec_rows, peak_rows = [], []
    for W in config.W_values:
        params = config.params(1, W)
        for i in range(s.realizations):
            seed = derive_seed(config.ensemble.base_seed, i)
            disorder = DisorderRealization.draw(seed, W, params.M)
            run = run_spectroscopy(
                params, disorder, Q=s.Q, N=1, settings=config.propagator, threshold=s.threshold,
                noise_sigma=s.noise_sigma, seed=seed,
            )
            sp = run.spectrum
            spec_rows += [(W, i, k, sp.eps[k], sp.power[k]) for k in range(sp.Q)]
            pk = run.peaks
            peak_rows += [(W, i, pk.eps[j], pk.weights[j], pk.bins[j]) for j in range(len(pk))]
    write_csv(run_dir / "spectrum.csv", ["W", "realization", "bin", "eps", "power"], spec_rows)
    write_csv(run_dir / "peaks.csv", ["W", "realization", "eps", "weight", "bin"], peak_rows)
    return ["spectrum.csv", "peaks.csv"]


def write_jw(config: RunConfig, run_dir: Path) -> list[str]:
    heff_rows, table_rows, field_rows = [], [], []
    for W in config.W_values:
        params = config.params(1, W)
        seed = derive_seed(config.ensemble.base_seed, 0)
        M = fermion_floquet_effective(params, DisorderRealization.draw(seed, W, params.M), config.propagator)
        heff_rows += [(W, *row) for row in matrix_rows(M)]
        table = spin_coupling_report(M)
        field_rows += [(W, l, f) for l, f in enumerate(table.fields, 1)]
        table_rows += [(W, *row) for row in table.rows]
    write_csv(run_dir / "fermion_heff.csv", ["W", "l", "l_tilde", "re", "im"], heff_rows)
    write_csv(run_dir / "spin_table.csv", ["W", "l", "l_tilde", "magnitude", "phase", "string_len"], table_rows)
    write_csv(run_dir / "z_fields.csv", ["W", "l", "field"], field_rows)
    return ["fermion_heff.csv", "spin_table.csv", "z_fields.csv"]
