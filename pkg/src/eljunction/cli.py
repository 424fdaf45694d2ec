"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 numerical
tolerance failure, 5 ensemble finished with failed realizations.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .basis import enumerate_basis
from .classical import omega0, poincare_section
from .config import ANNOTATED_EXAMPLE, RunConfig, parse_config
from .ensemble import default_orbit_starts, derive_seed, run_ensemble, write_classical
from .errors import NumericalToleranceError, ValidationError
from .floquet import floquet_analysis
from .graph import DegreeHistogram, GraphSummary, adjacency, export_graph
from .io import matrix_rows, write_csv
from .jw import fermion_floquet_effective, spin_coupling_report
from .model import DisorderRealization
from .spectral import participation_ratio, reference_distributions, r_histogram, r_statistics
from .spectroscopy import run_spectroscopy

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_FAILED_REALIZATIONS = 5


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--out", type=Path, help="output directory (default: config output.out)")
    p.add_argument("--seed", type=int, help="base seed (overrides ensemble.base_seed)")


def _model_flags(p, realizations=False):
    p.add_argument("--N", type=int, help="particle number")
    p.add_argument("--W", type=float, help="disorder strength")
    p.add_argument("--realization", type=int, default=0, help="realization index for the disorder draw")
    if realizations:
        p.add_argument("--realizations", type=int, help="ensemble size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eljunction", description="Driven ergodic-localized junction toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("basis", help="count and list Fock configurations")
    _common(p)
    p.add_argument("--N", type=int, help="particle number")
    p.add_argument("--L", type=int, help="number of sites")
    p.add_argument("--list", action="store_true", help="print every configuration")

    p = sub.add_parser("floquet", help="Floquet operator, quasienergies and H_eff for one realization")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("graph", help="adjacency graph of H_eff")
    _common(p)
    _model_flags(p)
    p.add_argument("--cutoff", type=float, help="edge threshold on |H_eff|")
    p.add_argument("--format", choices=["dot", "graphml", "csv"], default="dot")

    p = sub.add_parser("levels", help="spacing-ratio statistics over an ensemble")
    _common(p)
    _model_flags(p, realizations=True)

    p = sub.add_parser("pr", help="participation ratios for one realization")
    _common(p)
    _model_flags(p)
    p.add_argument("--mode", choices=["per-configuration", "per-state"])

    p = sub.add_parser("classical", help="classical stability chart and Poincare sections")
    _common(p)
    p.add_argument("--chart", action="store_true", help="write chart.csv")
    p.add_argument("--poincare", action="store_true", help="write poincare.csv")
    p.add_argument("--omega-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--g1-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--n-omega", type=int)
    p.add_argument("--n-g1", type=int)

    p = sub.add_parser("spectroscopy", help="emulated stroboscopic spectroscopy")
    _common(p)
    _model_flags(p)
    p.add_argument("--Q", type=int, help="number of stroboscopic samples")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("jw", help="fermionic effective matrix and spin-coupling table")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("ensemble", help="full ensemble run as configured")
    _common(p)
    p.add_argument("--run-id", help="name of the run directory")
    p.add_argument("--realizations", type=int)

    for n, text in ((1, "classical chart and sections"), (2, "H_eff maps, graphs and P(K)"), (3, "|c|^2 maps, PR and P(r)")):
        p = sub.add_parser(f"reproduce-fig{n}", help=f"plot-ready data: {text}")
        _common(p)
        if n > 1:
            p.add_argument("--realizations", type=int)

    sub.add_parser("example-config", help="print an annotated configuration file")
    return parser


def _load(args) -> RunConfig:
    cfg = parse_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ValidationError("--seed", f"must be >= 0, got {args.seed}")
        cfg = cfg.replace(ensemble=_replace(cfg.ensemble, base_seed=args.seed))
    if getattr(args, "realizations", None) is not None:
        if args.realizations < 1:
            raise ValidationError("--realizations", f"must be >= 1, got {args.realizations}")
        cfg = cfg.replace(ensemble=_replace(cfg.ensemble, realizations=args.realizations))
    return cfg


def _replace(obj, **kw):
    import dataclasses

    return dataclasses.replace(obj, **kw)


def _outdir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _single(args, cfg: RunConfig):
    """Params and disorder for a single-realization subcommand."""
    N = args.N if args.N is not None else cfg.N_values[0]
    W = args.W if args.W is not None else cfg.W_values[0]
    params = cfg.params(N, W)
    seed = derive_seed(cfg.ensemble.base_seed, args.realization)
    return params, DisorderRealization.draw(seed, W, params.M)


def cmd_basis(args, cfg):
    N = args.N if args.N is not None else cfg.N_values[0]
    L = args.L if args.L is not None else cfg.model.L
    basis = enumerate_basis(N, L)
    print(len(basis))
    if args.list:
        for l in range(1, len(basis) + 1):
            print(l, basis.label(l))
    if args.out:
        out = _outdir(args, cfg)
        basis.to_csv(out / "basis.csv")


def _write_floquet(out: Path, res, suffix=""):
    write_csv(
        out / f"quasienergies{suffix}.csv",
        ["mu", "eps"],
        ((mu + 1, e) for mu, e in enumerate(res.quasienergies)),
        kind="quasienergies",
    )
    write_csv(out / f"modes{suffix}.csv", ["l", "mu", "re", "im"], matrix_rows(res.modes), kind="modes")
    write_csv(out / f"heff{suffix}.csv", ["l", "l_tilde", "re", "im"], matrix_rows(res.H_eff), kind="heff")


def cmd_floquet(args, cfg):
    params, disorder = _single(args, cfg)
    res = floquet_analysis(params, disorder, cfg.propagator)
    out = _outdir(args, cfg)
    _write_floquet(out, res)
    print(f"D={res.dimension} omega={params.omega:.6g} eps in [{res.quasienergies[0]:.6g}, {res.quasienergies[-1]:.6g}]")


def cmd_graph(args, cfg):
    params, disorder = _single(args, cfg)
    res = floquet_analysis(params, disorder, cfg.propagator)
    cutoff = args.cutoff if args.cutoff is not None else cfg.analysis.cutoff
    a = adjacency(res.H_eff, cutoff)
    basis = enumerate_basis(params.N, params.L)
    labels = [basis.label(l) for l in range(1, len(basis) + 1)]
    out = _outdir(args, cfg)
    ext = {"dot": "dot", "graphml": "graphml", "csv": "csv"}[args.format]
    export_graph(a, out / f"graph.{ext}", res.H_eff, fmt=args.format, labels=labels)
    s = GraphSummary.of(a)
    hist = DegreeHistogram.empty(len(a)).add(a)
    write_csv(out / "degrees.csv", ["K", "count", "probability"], ((K, c, p) for K, (c, p) in enumerate(zip(hist.counts, hist.probability))))
    print(f"nodes={len(a)} edges={s.edge_count} density={s.density:.6g}")


def cmd_levels(args, cfg):
    N = args.N if args.N is not None else cfg.N_values[0]
    W = args.W if args.W is not None else cfg.W_values[0]
    params = cfg.params(N, W)
    ensemble = []
    for i in range(cfg.ensemble.realizations):
        disorder = DisorderRealization.draw(derive_seed(cfg.ensemble.base_seed, i), W, params.M)
        res = floquet_analysis(params, disorder, cfg.propagator)
        ensemble.append(r_statistics(np.sort(res.quasienergies)))
    hist = r_histogram(ensemble, cfg.analysis.r_bins)
    goe, poi = reference_distributions(hist.centers)
    out = _outdir(args, cfg)
    write_csv(
        out / "rstats.csv",
        ["r_lo", "r_hi", "count", "density", "p_goe", "p_poisson"],
        zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.density, goe, poi),
    )
    print(f"mean_r={hist.mean:.6g} +- {hist.stderr:.2g} (n={hist.n})")


def cmd_pr(args, cfg):
    params, disorder = _single(args, cfg)
    res = floquet_analysis(params, disorder, cfg.propagator)
    mode = args.mode or cfg.analysis.pr_mode
    pr = participation_ratio(res.modes, mode)
    out = _outdir(args, cfg)
    write_csv(out / "pr.csv", ["index", "pr"], ((i + 1, v) for i, v in enumerate(pr)))
    print(f"{mode}: mean PR={pr.mean():.6g}")


def cmd_classical(args, cfg):
    c = cfg.classical
    changes = {}
    if args.omega_range:
        changes["omega_range"] = tuple(args.omega_range)
    if args.g1_range:
        changes["g1_range"] = tuple(args.g1_range)
    if args.n_omega:
        changes["n_omega"] = args.n_omega
    if args.n_g1:
        changes["n_g1"] = args.n_g1
    chart, sections = args.chart, args.poincare
    if not (chart or sections):
        chart = sections = True
    if not sections:
        changes["orbits"] = 0
    cfg = cfg.replace(classical=_replace(c, **changes))
    out = _outdir(args, cfg)
    if chart:
        files = write_classical(cfg, out)
    else:
        orbits = poincare_section(default_orbit_starts(cfg), cfg.classical.n_periods, cfg.model)
        rows = ((o + 1, n, x, k) for o, orb in enumerate(orbits) for n, (x, k) in enumerate(orb))
        write_csv(out / "poincare.csv", ["orbit_id", "n", "x", "k"], rows)
        files = ["poincare.csv"]
    print(f"Omega0={omega0(cfg.model):.6g} wrote {', '.join(files)}")


def cmd_spectroscopy(args, cfg):
    s = cfg.spectroscopy
    params, disorder = _single(args, cfg)
    if args.N is None:
        params = params.replace(N=1)
    run = run_spectroscopy(
        params,
        disorder,
        Q=args.Q or s.Q,
        N=params.N,
        settings=cfg.propagator,
        threshold=args.threshold if args.threshold is not None else s.threshold,
        noise_sigma=args.noise_sigma if args.noise_sigma is not None else s.noise_sigma,
        seed=derive_seed(cfg.ensemble.base_seed, args.realization),
    )
    out = _outdir(args, cfg)
    sp, pk = run.spectrum, run.peaks
    write_csv(out / "spectrum.csv", ["bin", "eps", "power"], ((k, sp.eps[k], sp.power[k]) for k in range(sp.Q)))
    write_csv(out / "peaks.csv", ["eps", "weight", "bin"], zip(pk.eps, pk.weights, pk.bins))
    print(f"{len(pk)} peaks, bin width {sp.bin_width:.4g}")


def cmd_jw(args, cfg):
    params, disorder = _single(args, cfg)
    M = fermion_floquet_effective(params.replace(N=1), disorder, cfg.propagator)
    table = spin_coupling_report(M)
    out = _outdir(args, cfg)
    write_csv(out / "fermion_heff.csv", ["l", "l_tilde", "re", "im"], matrix_rows(M))
    write_csv(out / "spin_table.csv", ["l", "l_tilde", "magnitude", "phase", "string_len"], table.rows)
    write_csv(out / "z_fields.csv", ["l", "field"], enumerate(table.fields, 1))
    print(f"{len(table.rows)} couplings")


def cmd_ensemble(args, cfg):
    run = run_ensemble(cfg, out=args.out, run_id=args.run_id)
    print(run.directory)
    for f in run.failures:
        print(f"failed: N={f['N']} W={f['W']} i={f['realization']}: {f['error']}", file=sys.stderr)
    return 0 if run.ok else EXIT_FAILED_REALIZATIONS


def cmd_fig1(args, cfg):
    out = _outdir(args, cfg)
    files = write_classical(cfg, out)
    print(f"Omega0={omega0(cfg.model):.6g} wrote {', '.join(files)}")


def _panel_realizations(cfg: RunConfig, out: Path, N: int, fig: int):
    """Single-realization panels for both disorder strengths."""
    seed = derive_seed(cfg.ensemble.base_seed, 0)
    for W in cfg.W_values:
        params = cfg.params(N, W)
        res = floquet_analysis(params, DisorderRealization.draw(seed, W, params.M), cfg.propagator)
        tag = f"_N{N}_W{W:g}"
        if fig == 2:
            write_csv(out / f"heff_abs{tag}.csv", ["l", "l_tilde", "abs"], matrix_rows(np.abs(res.H_eff), "real"), kind="heff_abs")
            export_graph(adjacency(res.H_eff, cfg.analysis.cutoff), out / f"graph{tag}.dot", res.H_eff)
        else:
            prob = np.abs(res.modes) ** 2
            rows = ((l + 1, mu + 1, res.quasienergies[mu], prob[l, mu]) for l in range(prob.shape[0]) for mu in range(prob.shape[1]))
            write_csv(out / f"amplitudes{tag}.csv", ["l", "mu", "eps", "prob"], rows, kind="amplitudes")
            pr = participation_ratio(res.modes, cfg.analysis.pr_mode)
            write_csv(out / f"pr_single{tag}.csv", ["l", "pr"], ((l + 1, v) for l, v in enumerate(pr)), kind="pr_single")


def _fig_ensemble(args, cfg, fig: int):
    N = 2
    toggles = _replace(
        cfg.analysis,
        graph=fig == 2,
        pr=fig == 3,
        rstats=fig == 3,
        classical=False,
        spectroscopy=False,
        jw=False,
    )
    cfg = cfg.replace(N_values=(N,), analysis=toggles)
    out = _outdir(args, cfg)
    run = run_ensemble(cfg, out=out, run_id=f"fig{fig}-ensemble")
    _panel_realizations(cfg, out, N, fig)
    print(out)
    return 0 if run.ok else EXIT_FAILED_REALIZATIONS


def cmd_fig2(args, cfg):
    return _fig_ensemble(args, cfg, 2)


def cmd_fig3(args, cfg):
    return _fig_ensemble(args, cfg, 3)


COMMANDS = {
    "basis": cmd_basis,
    "floquet": cmd_floquet,
    "graph": cmd_graph,
    "levels": cmd_levels,
    "pr": cmd_pr,
    "classical": cmd_classical,
    "spectroscopy": cmd_spectroscopy,
    "jw": cmd_jw,
    "ensemble": cmd_ensemble,
    "reproduce-fig1": cmd_fig1,
    "reproduce-fig2": cmd_fig2,
    "reproduce-fig3": cmd_fig3,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    if args.command == "example-config":
        print(ANNOTATED_EXAMPLE, end="")
        return 0
    try:
        cfg = _load(args)
        status = COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalToleranceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return status or 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
