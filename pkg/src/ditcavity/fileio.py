"""CSV/JSON exchange formats.

Every JSON document carries ``schema_version`` and ``kind``.  Floats are
written with 17 significant digits so files round-trip exactly and repeated
runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .fitting import CountSurface, FitResult
from .model import MHZ, SystemParams
from .spectra import SpectrumSurface
from .steady_state import DriveMode, ProbeConfig

SCHEMA_VERSION = 1

SURFACE_COLUMNS = ["delta_c_rad_s", "delta_a_rad_s", "delta_c_over_kappa", "delta_a_over_gamma", "value"]
COUNT_COLUMNS = SURFACE_COLUMNS[:4] + ["counts"]
TRAJECTORY_COLUMNS = ["t_s", "re_a", "im_a", "re_sigma", "im_sigma"]
EIGEN_COLUMNS = [
    "g_mhz", "re_plus_mhz", "im_plus_mhz", "re_minus_mhz", "im_minus_mhz",
    "undamped_plus_mhz", "undamped_minus_mhz",
]


class DataFormatError(ValueError):
    """Input file missing, empty or not in the expected layout."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path: Path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _dump_json(obj, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def params_to_dict(params: SystemParams) -> dict:
    return {
        "rad_s": {k: getattr(params, k) for k in ("g", "kappa", "gamma", "omega_c", "omega_a")},
        "mhz": params.to_mhz(),
    }


def params_from_dict(d: dict) -> SystemParams:
    return SystemParams(**d["rad_s"])


def probe_to_dict(probe: ProbeConfig | None) -> dict | None:
    if probe is None:
        return None
    return {
        "mode": probe.mode.value, "j_in": probe.j_in, "rabi": probe.rabi,
        "kappa_T": probe.kappa_T, "R1": probe.R1, "R2": probe.R2,
    }


def probe_from_dict(d: dict | None) -> ProbeConfig | None:
    return None if d is None else ProbeConfig(**d)


def _grid_rows(dc, da, values, kappa, gamma):
    for i, c in enumerate(dc):
        for j, a in enumerate(da):
            yield (c, a, c / kappa, a / gamma, values[i, j])


def write_surface_csv(surface: SpectrumSurface, path) -> None:
    """Long format: one row per grid point, raw and normalised axes."""
    p = surface.params
    _write_rows(path, SURFACE_COLUMNS, _grid_rows(surface.delta_c, surface.delta_a, surface.values, p.kappa, p.gamma))


def surface_to_dict(surface: SpectrumSurface) -> dict:
    dc_n, da_n = surface.normalized_axes()
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "spectrum_surface",
        "mode": surface.mode.value,
        "params": params_to_dict(surface.params),
        "probe": probe_to_dict(surface.probe),
        "delta_c_rad_s": surface.delta_c.tolist(),
        "delta_a_rad_s": surface.delta_a.tolist(),
        "delta_c_over_kappa": dc_n.tolist(),
        "delta_a_over_gamma": da_n.tolist(),
        "values": surface.values.tolist(),
        "value_units": "photons/s",
    }


def write_surface_json(surface: SpectrumSurface, path) -> None:
    _dump_json(surface_to_dict(surface), path)


def _load_json(path, kind: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise DataFormatError(f"{path} is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
    if doc.get("kind") != kind:
        raise DataFormatError(f"{path}: expected kind {kind!r}, got {doc.get('kind')!r}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def read_surface_json(path) -> SpectrumSurface:
    doc = _load_json(path, "spectrum_surface")
    return SpectrumSurface(
        doc["delta_c_rad_s"], doc["delta_a_rad_s"], doc["values"], DriveMode(doc["mode"]),
        params_from_dict(doc["params"]), probe_from_dict(doc.get("probe")),
    )


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_counts(data: CountSurface, csv_path) -> Path:
    """Counts CSV plus a JSON sidecar (grids, exposure, realisations, seed)."""
    if data.params is None:
        raise ValueError("count surface needs its system parameters for export")
    p = data.params
    _write_rows(csv_path, COUNT_COLUMNS, _grid_rows(data.delta_c, data.delta_a, data.counts, p.kappa, p.gamma))
    side = sidecar_path(csv_path)
    _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "count_surface",
            "mode": data.mode.value,
            "exposure_s": data.exposure,
            "realisations": data.realisations,
            "seed": data.seed,
            "expected": data.expected,
            "params": params_to_dict(p),
            "probe": probe_to_dict(data.probe),
            "delta_c_rad_s": data.delta_c.tolist(),
            "delta_a_rad_s": data.delta_a.tolist(),
            "counts_meaning": "total over realisations",
        },
        side,
    )
    return side


def read_counts(csv_path) -> CountSurface:
    csv_path = Path(csv_path)
    try:
        text = csv_path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {csv_path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise DataFormatError(f"{csv_path} has no data rows")
    reader = csv.reader(lines)
    header = next(reader)
    if header != COUNT_COLUMNS:
        raise DataFormatError(f"{csv_path}: header must be {','.join(COUNT_COLUMNS)}")
    side = _load_json(sidecar_path(csv_path), "count_surface")
    dc = np.asarray(side["delta_c_rad_s"], dtype=float)
    da = np.asarray(side["delta_a_rad_s"], dtype=float)
    counts = np.full((dc.size, da.size), np.nan)
    index_c = {fmt(v): i for i, v in enumerate(dc)}
    index_a = {fmt(v): j for j, v in enumerate(da)}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(COUNT_COLUMNS):
            raise DataFormatError(f"{csv_path}:{lineno}: expected {len(COUNT_COLUMNS)} fields")
        try:
            i = index_c[fmt(float(row[0]))]
            j = index_a[fmt(float(row[1]))]
            counts[i, j] = float(row[4])
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{csv_path}:{lineno}: {exc!r} does not match the sidecar grid") from exc
    if np.isnan(counts).any():
        raise DataFormatError(f"{csv_path}: grid incomplete")
    try:
        return CountSurface(
            dc, da, counts, float(side["exposure_s"]), int(side["realisations"]), DriveMode(side["mode"]),
            side.get("seed"), params_from_dict(side["params"]), probe_from_dict(side.get("probe")),
            bool(side.get("expected", False)),
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{csv_path}: sidecar incomplete ({exc})") from exc


def fit_to_dict(result: FitResult) -> dict:
    d = result.to_dict()
    d.update(
        schema_version=SCHEMA_VERSION,
        kind="fit_result",
        g_hat_mhz=result.g_hat / MHZ,
        correlation=result.correlation() if all(math.isfinite(v) for r in result.covariance for v in r) else None,
    )
    return d


def write_fit_json(result: FitResult, path) -> None:
    _dump_json(fit_to_dict(result), path)


def read_fit_json(path) -> FitResult:
    doc = _load_json(path, "fit_result")
    for extra in ("schema_version", "kind", "g_hat_mhz", "correlation"):
        doc.pop(extra, None)
    return FitResult(**doc)


def write_trajectory_csv(traj, path) -> None:
    _write_rows(
        path, TRAJECTORY_COLUMNS,
        zip(traj.times, traj.a.real, traj.a.imag, traj.sigma.real, traj.sigma.imag),
    )


def write_eigen_sweep_csv(g_values, eig: np.ndarray, undamped, path) -> None:
    """Tracked damped branches and undamped doublet versus coupling, all in MHz."""
    rows = (
        (g / MHZ, e[0].real / MHZ, e[0].imag / MHZ, e[1].real / MHZ, e[1].imag / MHZ, u[0] / MHZ, u[1] / MHZ)
        for g, e, u in zip(g_values, eig, undamped)
    )
    _write_rows(path, EIGEN_COLUMNS, rows)
