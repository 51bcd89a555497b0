"""Command-line front end.

Frequencies on the command line and in config files are ordinary
frequencies in MHz (angular value / 2pi).  Exit status: 0 success,
1 numerical failure, 2 input or parse failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import fileio, plotting
from .dynamics import (
    IntegrationError,
    PhaseUnwrapError,
    _resonant_detuning,
    group_delay_closed_form,
    group_delay_numeric,
    integrate,
    ringdown_rate,
)
from .fitting import expected_counts, fit_surface, model_counts, synthesize_counts
from .leastsq import FitError
from .model import (
    MHZ,
    RegimeError,
    classify_regime,
    cooperativity,
    damped_eigenvalues,
    sweep_eigenvalues,
    undamped_eigenfrequencies,
)
from .spectra import (
    butterfly_peaks,
    diagonal_grid,
    fit_lorentzian,
    minima_locus,
    scan_2d,
    scan_diagonal,
)
from .steady_state import DriveMode, ProbeConfig

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _emit(report: dict) -> None:
    for key, value in report.items():
        if isinstance(value, float):
            value = format(value, ".10g")
        print(f"{key} = {value}")


def _write_report(report: dict, out: Path, name: str) -> Path:
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in report.items()}
    doc = {"schema_version": fileio.SCHEMA_VERSION, **clean}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def build_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    s = cfg.system
    if args.g is not None:
        s.g_mhz, s.cooperativity = args.g, None
    if args.kappa is not None:
        s.kappa_mhz = args.kappa
    if args.gamma is not None:
        s.gamma_mhz = args.gamma
    if args.detuning is not None:
        s.omega_c_mhz, s.omega_a_mhz = args.detuning, 0.0
    if args.C is not None:
        s.cooperativity = args.C
    if args.mode is not None:
        cfg.probe.mode = args.mode
    if args.seed is not None:
        cfg.seed = args.seed
    cfgmod.validate(cfg, "command line")
    return cfg


def sanity_warnings(params) -> None:
    if params.kappa < params.gamma:
        _warn("kappa < gamma: check units (MHz expected) and rate ordering")
    if params.g > 100 * params.kappa:
        _warn("g > 100 kappa: check units (MHz expected)")


def cmd_eigen(args, cfg, out: Path) -> int:
    p = cfg.params()
    modes = damped_eigenvalues(p)
    w_plus, w_minus = undamped_eigenfrequencies(p)
    report = {
        "cooperativity": cooperativity(p),
        "g_mhz": p.g / MHZ,
        "kappa_mhz": p.kappa / MHZ,
        "gamma_mhz": p.gamma / MHZ,
    }
    try:
        regime = classify_regime(p)
        report.update(regime=regime.tag.value, g_ep_mhz=regime.g_ep / MHZ, g_sc_mhz=regime.g_sc / MHZ)
    except RegimeError as exc:
        report.update(regime="undefined", regime_note=str(exc))
    report.update(
        undamped_plus_mhz=w_plus / MHZ,
        undamped_minus_mhz=w_minus / MHZ,
        re_plus_mhz=modes.omega_plus.real / MHZ,
        im_plus_mhz=modes.omega_plus.imag / MHZ,
        re_minus_mhz=modes.omega_minus.real / MHZ,
        im_minus_mhz=modes.omega_minus.imag / MHZ,
        width_plus_mhz=modes.widths[0] / MHZ,
        width_minus_mhz=modes.widths[1] / MHZ,
        mixing_plus_atom=modes.mixing_plus[0],
        mixing_plus_photon=modes.mixing_plus[1],
        mixing_minus_atom=modes.mixing_minus[0],
        mixing_minus_photon=modes.mixing_minus[1],
        exceptional_point=modes.degenerate,
    )
    g_max = args.sweep_max if args.sweep_max is not None else cfg.eigen.sweep_g_max_mhz
    if g_max is not None:
        n = args.sweep_points or cfg.eigen.sweep_points
        g_values = np.linspace(0.0, g_max * MHZ, n)
        eig = sweep_eigenvalues(p, g_values)
        undamped = [undamped_eigenfrequencies(p.with_(g=float(g))) for g in g_values]
        fileio.write_eigen_sweep_csv(g_values, eig, undamped, out / "eigen_sweep.csv")
        plotting.plot_eigen_sweep(g_values, eig, out / "eigen_sweep.svg", p.kappa)
        report["sweep_csv"] = "eigen_sweep.csv"
    _emit(report)
    _write_report(report, out, "eigen.json")
    return EXIT_OK


def _surface_and_features(cfg, refine=None):
    p, probe = cfg.params(), cfg.probe_config()
    if refine is not None:
        cfg.grid.refine = refine
    surface = scan_2d(p, probe, cfg.grid.grids(p, probe.mode))
    return surface


def cmd_scan(args, cfg, out: Path) -> int:
    surface = _surface_and_features(cfg, args.refine)
    p = surface.params
    report = {"mode": surface.mode.value, "cooperativity": cooperativity(p), "shape": list(surface.values.shape)}
    if args.format == "json":
        fileio.write_surface_json(surface, out / "surface.json")
    else:
        fileio.write_surface_csv(surface, out / "surface.csv")
        fileio.write_surface_json(surface, out / "surface.json")
    if np.all(surface.values == 0):
        _warn("surface is identically zero (no coupling to the detected mode)")
    plotting.plot_surface(surface, out / "surface.svg", overlay=not args.no_overlay)
    if surface.mode is DriveMode.CAVITY:
        try:
            feats = minima_locus(surface)
            report.update(
                no_coupling=feats.no_coupling,
                locus_points=len(feats.minima_locus),
                excluded_columns=len(feats.excluded_columns),
            )
            if feats.minima_locus:
                prod = [dc * da / p.g**2 for dc, da in feats.minima_locus]
                report.update(locus_product_min=min(prod), locus_product_max=max(prod))
        except ValueError as exc:
            report["locus_note"] = f"{exc}; rerun with --refine 4"
    else:
        peaks = butterfly_peaks(p)
        report.update(butterfly_lower=peaks.lower, butterfly_upper=peaks.upper, single_peak=peaks.single_peak)
    _emit(report)
    _write_report(report, out, "scan_report.json")
    return EXIT_OK


def cmd_diagonal(args, cfg, out: Path) -> int:
    p, probe = cfg.params(), cfg.probe_config()
    span = args.span or cfg.grid.diagonal_span
    points = args.points or cfg.grid.diagonal_points
    spectrum = scan_diagonal(p, probe, diagonal_grid(p, span, points))
    fit, err, _ = fit_lorentzian(spectrum.detuning, spectrum.values)
    C = cooperativity(p)
    report = {
        "mode": probe.mode.value,
        "cooperativity": C,
        "halfwidth_mhz": fit[3] / MHZ,
        "halfwidth_err_mhz": err[3] / MHZ,
        "halfwidth_over_gamma": fit[3] / p.gamma,
        "expected_over_gamma": 1.0 + C,
    }
    rows = zip(spectrum.detuning, spectrum.detuning / p.gamma, spectrum.values)
    fileio._write_rows(out / "diagonal.csv", ["delta_rad_s", "delta_over_gamma", "value"], rows)
    plotting.plot_diagonal(spectrum, out / "diagonal.svg", fit)
    _emit(report)
    _write_report(report, out, "diagonal_report.json")
    return EXIT_OK


def cmd_synth(args, cfg, out: Path) -> int:
    surface = _surface_and_features(cfg, args.refine)
    s = cfg.synth
    peak = args.peak_counts or s.peak_counts
    exposure = (args.exposure_ms or s.exposure_ms) * 1e-3
    real = args.realisations or s.realisations
    vmax = surface.values.max()
    if vmax <= 0:
        raise InputError("surface is identically zero; nothing to synthesise")
    amplitude = peak / (vmax * exposure)
    if args.noiseless or s.noiseless:
        data = expected_counts(surface, amplitude, exposure, real)
    else:
        data = synthesize_counts(surface, amplitude, exposure, real, cfg.seed)
    side = fileio.write_counts(data, out / "counts.csv")
    plotting.plot_counts(data, out / "counts.svg")
    _emit({"counts_csv": str(out / "counts.csv"), "sidecar": str(side), "seed": data.seed,
           "cooperativity": cooperativity(surface.params)})
    return EXIT_OK


def cmd_fit(args, cfg, out: Path) -> int:
    data = fileio.read_counts(args.data)
    fixed = {"kappa": data.params.kappa, "gamma": data.params.gamma, "detuning": data.params.detuning}
    if args.kappa is not None:
        fixed["kappa"] = args.kappa * MHZ
    if args.gamma is not None:
        fixed["gamma"] = args.gamma * MHZ
    C0 = args.C0 if args.C0 is not None else cfg.fit.C0
    A0 = args.A0 if args.A0 is not None else cfg.fit.A0
    init = None if C0 is None or A0 is None else (C0, A0)
    result = fit_surface(
        data, fixed=fixed, init=init, max_iter=args.max_iter or cfg.fit.max_iter,
        parametrization=cfg.fit.parametrization,
    )
    fileio.write_fit_json(result, out / "fit_result.json")
    plotting.plot_fit(data, model_counts(result, data), out / "fit.svg", result.C_hat)
    _emit({
        "C_hat": result.C_hat,
        "amplitude_hat": result.amplitude_hat,
        "g_hat_mhz": result.g_hat / MHZ,
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
        "message": result.message,
    })
    if not result.converged:
        print(f"error: fit did not converge ({result.message})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_ringdown(args, cfg, out: Path) -> int:
    p, probe = cfg.params(), cfg.probe_config()
    dt = cfg.dynamics.dt_kappa / p.kappa
    rate = ringdown_rate(p, probe, dt=dt)
    C = cooperativity(p)
    modes = damped_eigenvalues(p)
    report = {
        "mode": probe.mode.value,
        "cooperativity": C,
        "rate_per_s": rate,
        "rate_over_2gamma": rate / (2 * p.gamma),
        "expected_over_2gamma": 1.0 + C,
        "relative_error": rate / (2 * p.gamma * (1 + C)) - 1.0,
        "slow_mode_rate_over_2gamma": -modes.omega_minus.imag / p.gamma,
    }
    report.update(_group_delay_report(p, cfg))
    if args.trajectory:
        det = _resonant_detuning(p)
        off = ProbeConfig(mode=probe.mode, kappa_T=probe.kappa_T, R1=probe.R1, R2=probe.R2)
        from .steady_state import steady_field

        t_end = 5 / p.kappa + 3 / (2 * p.gamma * (1 + C))
        n = t_end / dt
        traj = integrate(p, off, det, steady_field(p, probe, det), t_end, dt, stride=max(1, int(n // 5000)))
        fileio.write_trajectory_csv(traj, out / "trajectory.csv")
        plotting.plot_trajectory(traj, out / "trajectory.svg", p.kappa)
    _emit(report)
    _write_report(report, out, "ringdown.json")
    return EXIT_OK


def _group_delay_report(p, cfg) -> dict:
    closed = group_delay_closed_form(p)
    numeric = group_delay_numeric(p, cfg.dynamics.domega_gamma * p.gamma)
    rel = abs(numeric - closed) / abs(closed) if closed != 0 else math.nan
    return {
        "group_delay_closed_s": closed,
        "group_delay_numeric_s": numeric,
        "group_delay_relative_difference": rel,
        "group_delay_abs_difference_s": abs(numeric - closed),
        "group_delay_times_kappa": closed * p.kappa,
        "zero_crossing": bool(abs(numeric) * p.kappa < 1e-3),
    }


def cmd_groupdelay(args, cfg, out: Path) -> int:
    p = cfg.params()
    if args.domega_gamma is not None:
        cfg.dynamics.domega_gamma = args.domega_gamma
    report = {"cooperativity": cooperativity(p), **_group_delay_report(p, cfg)}
    _emit(report)
    _write_report(report, out, "groupdelay.json")
    return EXIT_OK


COMMANDS = {
    "eigen": cmd_eigen,
    "scan": cmd_scan,
    "diagonal": cmd_diagonal,
    "synth": cmd_synth,
    "fit": cmd_fit,
    "ringdown": cmd_ringdown,
    "groupdelay": cmd_groupdelay,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration (frequencies in MHz)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="random seed for synthetic data (default: 0)")
    common.add_argument("--mode", choices=["cavity", "atom"], help="drive the cavity mode or the atoms (default: cavity)")
    common.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="surface export: csv writes long CSV + JSON, json writes JSON only (default: csv)")
    common.add_argument("--g", type=float, metavar="MHZ", help="coupling g/2pi in MHz (default: 95)")
    common.add_argument("--kappa", type=float, metavar="MHZ", help="cavity field decay kappa/2pi in MHz (default: 3000)")
    common.add_argument("--gamma", type=float, metavar="MHZ", help="atomic field decay gamma/2pi in MHz (default: 3)")
    common.add_argument("--detuning", type=float, metavar="MHZ", help="(omega_c - omega_a)/2pi in MHz (default: 0)")
    common.add_argument("--C", type=float, metavar="C", help="cooperativity; sets g = sqrt(C kappa gamma)")

    parser = argparse.ArgumentParser(prog="ditcavity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigen", parents=[common], help="normal modes, regime and optional g sweep")
    p.add_argument("--sweep-max", type=float, metavar="MHZ", help="sweep g/2pi from 0 to this value (MHz)")
    p.add_argument("--sweep-points", type=int, metavar="N", help="points in the g sweep (default: 300)")

    p = sub.add_parser("scan", parents=[common], help="2D detuning scan with heatmap")
    p.add_argument("--refine", type=int, metavar="N", help="multiply the reference point count per axis")
    p.add_argument("--no-overlay", action="store_true", help="omit the da = g^2/dc curve")

    p = sub.add_parser("diagonal", parents=[common], help="spectrum along da = dc and its Lorentzian width")
    p.add_argument("--span", type=float, metavar="W", help="half-span in units of gamma(1+C) (default: 10)")
    p.add_argument("--points", type=int, metavar="N", help="grid points (default: 801)")

    p = sub.add_parser("synth", parents=[common], help="Poisson photon-count surface")
    p.add_argument("--refine", type=int, metavar="N")
    p.add_argument("--peak-counts", type=float, metavar="N", help="mean counts per exposure at the maximum (default: 200)")
    p.add_argument("--exposure-ms", type=float, metavar="MS", help="exposure per realisation in ms (default: 1)")
    p.add_argument("--realisations", type=int, metavar="N", help="exposures averaged per pixel (default: 40)")
    p.add_argument("--noiseless", action="store_true", help="write expected counts without noise")

    p = sub.add_parser("fit", parents=[common], help="fit C and amplitude to a count surface")
    p.add_argument("data", help="counts CSV (JSON sidecar alongside)")
    p.add_argument("--C0", type=float, help="initial cooperativity (default: from diagonal width)")
    p.add_argument("--A0", type=float, help="initial amplitude in counts (default: from corners)")
    p.add_argument("--max-iter", type=int, metavar="N", help="iteration cap (default: 200)")

    p = sub.add_parser("ringdown", parents=[common], help="decay rate after resonant shut-off, plus group delay")
    p.add_argument("--trajectory", action="store_true", help="also write the trajectory CSV")

    p = sub.add_parser("groupdelay", parents=[common], help="closed-form and numeric group delay")
    p.add_argument("--domega-gamma", type=float, metavar="X", help="finite-difference step in units of gamma (default: 0.001)")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        cfg = build_config(args)
        sanity_warnings(cfg.params())
        return COMMANDS[args.command](args, cfg, out)
    except (cfgmod.ConfigError, fileio.DataFormatError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitError, IntegrationError, PhaseUnwrapError, FloatingPointError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
