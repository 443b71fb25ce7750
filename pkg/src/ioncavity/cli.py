"""Command-line front end composing the simulation and analysis modules."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, report, sweeps
from .config import ConfigError, ScenarioConfig, load_config
from .fitting import fit_exponential_loss, fit_lorentzian


def _common_flags(parser):
    parser.add_argument("--config", metavar="PATH",
                        help="key = value configuration file")
    parser.add_argument("--out", metavar="PATH", help="output CSV path")
    parser.add_argument("--fock", type=int, metavar="N",
                        help="override the Fock cutoff")
    parser.add_argument("--check-convergence", action="store_true",
                        help="verify observables are stable under N -> N+2")
    parser.add_argument("--parallel", action="store_true",
                        help="evaluate sweep points in parallel")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip the figure next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ioncavity",
        description="Simulate a laser-driven two-level emitter in a lossy "
                    "optical cavity: emission sweeps, interference minima, "
                    "photon correlations, geometry bookkeeping and fits.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("sweep-cavity", "sweep a detuning and tabulate normalized emission"),
        ("sweep-atom", "sweep delta_a with the cavity locked to the atom"),
        ("minima-map", "map the free-space minima against the predictions"),
        ("g2", "second-order correlation with the detector model"),
        ("geometry", "parameter-chain report with consistency flags"),
    ):
        _common_flags(sub.add_parser(name, help=text))

    fit = sub.add_parser("fit", help="least-squares fit of a two-column CSV")
    fit.add_argument("file", help="CSV with x in column 1, y in column 2")
    fit.add_argument("--model", choices=("lorentzian", "exponential-loss"),
                     default="lorentzian")
    fit.add_argument("--out", metavar="PATH", help="write the report here too")
    return parser


def _load(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    if args.fock is not None:
        config = config.with_(fock_cutoff=args.fock)
    return config


def _metadata(config: ScenarioConfig, command: str) -> dict:
    meta = {"command": command, "version": __version__}
    meta.update(config.resolved())
    return meta


RECORD_COLUMNS = ("delta_a_mhz", "delta_c_mhz", "p_cavity_norm",
                  "p_free_norm", "p_total_norm", "n_bar")


def _emit_records(args, config, command, records, summary, variable):
    out = args.out or f"{command.replace('-', '_')}.csv"
    rows = [tuple(getattr(r, c) for c in RECORD_COLUMNS) for r in records]
    report.write_csv(out, _metadata(config, command), RECORD_COLUMNS, rows,
                     summary)
    if not args.no_plot:
        report.plot_sweep(records, variable, report.figure_path(out))
    print(f"wrote {out}")
    for key, value in summary.items():
        print(f"  {key} = {value}")


def cmd_sweep_cavity(args) -> int:
    config = _load(args)
    records, summary = sweeps.sweep_cavity(
        config, parallel=args.parallel,
        check_convergence=args.check_convergence)
    _emit_records(args, config, "sweep-cavity", records, summary,
                  config.sweep_variable)
    return 0


def cmd_sweep_atom(args) -> int:
    config = _load(args)
    records, summary, _ = sweeps.sweep_atom(
        config, parallel=args.parallel,
        check_convergence=args.check_convergence)
    _emit_records(args, config, "sweep-atom", records, summary, "delta_a")
    return 0


def cmd_minima_map(args) -> int:
    config = _load(args)
    rows = sweeps.minima_map(config, parallel=args.parallel)
    out = args.out or "minima_map.csv"
    columns = list(rows[0].keys())
    report.write_csv(out, _metadata(config, "minima-map"), columns,
                     [tuple(r[c] for c in columns) for r in rows])
    if not args.no_plot:
        report.plot_minima(rows, report.figure_path(out))
    print(f"wrote {out}")
    return 0


def cmd_g2(args) -> int:
    config = _load(args)
    if args.check_convergence and config.g_mhz != 0.0:
        sweeps.check_truncation(config.system_params())
    tau, ideal, convolved, info = sweeps.g2_scan(config)
    out = args.out or "g2.csv"
    rows = list(zip(np.asarray(tau) * 1e9, ideal, convolved))
    report.write_csv(out, _metadata(config, "g2"),
                     ("tau_ns", "g2_ideal", "g2_convolved"), rows, info)
    if not args.no_plot:
        report.plot_g2(tau, ideal, convolved, report.figure_path(out))
    print(f"wrote {out}")
    for key, value in info.items():
        print(f"  {key} = {value}")
    return 0


def cmd_geometry(args) -> int:
    config = _load(args)
    rows = sweeps.geometry_report(config)
    header = f"{'quantity':<26} {'value':>14} {'reference':>12} {'status':>8}"
    print(header)
    print("-" * len(header))
    csv_rows = []
    for name, value, ref, tol, ok in rows:
        status = "-" if ok is None else ("ok" if ok else "MISMATCH")
        ref_text = "-" if ref is None else f"{ref:g}"
        print(f"{name:<26} {value:>14.6g} {ref_text:>12} {status:>8}")
        csv_rows.append((name, value, "" if ref is None else ref,
                         "" if tol is None else tol, status))
    if args.out:
        report.write_csv(args.out, _metadata(config, "geometry"),
                         ("quantity", "value", "reference", "tolerance",
                          "status"), csv_rows)
        print(f"wrote {args.out}")
    return 0


def cmd_fit(args) -> int:
    x, y = report.read_xy_csv(args.file)
    if args.model == "lorentzian":
        result = fit_lorentzian(x, y)
    else:
        result = fit_exponential_loss(x, y)
    lines = [f"model = {args.model}", f"converged = {result.converged}",
             f"iterations = {result.iterations}",
             f"residual_norm = {result.residual_norm:.6g}"]
    if result.message:
        lines.append(f"note = {result.message}")
    for name, value in result.params.items():
        err = result.stderr.get(name, float("nan"))
        lines.append(f"{name} = {value:.10g} +- {err:.3g}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    return 0 if result.converged else 1


_HANDLERS = {
    "sweep-cavity": cmd_sweep_cavity,
    "sweep-atom": cmd_sweep_atom,
    "minima-map": cmd_minima_map,
    "g2": cmd_g2,
    "geometry": cmd_geometry,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
