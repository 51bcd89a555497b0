"""Detuning scans and the spectral features extracted from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .leastsq import FitError, least_squares
from .model import SystemParams, cooperativity
from .steady_state import (
    DetuningPair,
    DriveMode,
    ProbeConfig,
    atom_drive_denominator,
    reflected_flux,
)

#: Points per axis of the reference scans (reflection, emission).
DEFAULT_POINTS = {DriveMode.CAVITY: 28, DriveMode.ATOM: 31}


class SpanError(ValueError):
    """Scan window too narrow to resolve the feature."""


@dataclass
class SpectrumSurface:
    """Model values on a (delta_c, delta_a) grid; ``values[i, j]`` is at (dc_i, da_j)."""

    delta_c: np.ndarray
    delta_a: np.ndarray
    values: np.ndarray
    mode: DriveMode
    params: SystemParams
    probe: ProbeConfig | None = None

    def __post_init__(self):
        self.delta_c = np.asarray(self.delta_c, dtype=float)
        self.delta_a = np.asarray(self.delta_a, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        for name, grid in (("delta_c", self.delta_c), ("delta_a", self.delta_a)):
            if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
                raise ValueError(f"{name} grid must be non-empty and strictly increasing")
        if self.values.shape != (self.delta_c.size, self.delta_a.size):
            raise ValueError("values shape must be (len(delta_c), len(delta_a))")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("surface values must be finite and non-negative")

    def normalized_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Axes in units of the damping rates: (dc/kappa, da/gamma)."""
        return self.delta_c / self.params.kappa, self.delta_a / self.params.gamma


@dataclass
class Spectrum1D:
    detuning: np.ndarray
    values: np.ndarray
    mode: DriveMode
    params: SystemParams


@dataclass
class FeatureSet:
    minima_locus: list = field(default_factory=list)
    excluded_columns: list = field(default_factory=list)
    no_coupling: bool = False
    butterfly_peaks: tuple | None = None
    halfwidth: float | None = None
    halfwidth_err: float | None = None


def default_grids(
    params: SystemParams, mode: DriveMode, refine: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Reference sampling: dc/kappa in [-1.5, 1.5], da/gamma in +-15 max(1, C/3)."""
    mode = DriveMode.parse(mode)
    n = DEFAULT_POINTS[mode] * int(refine)
    span_a = 15.0 * max(1.0, cooperativity(params) / 3.0)
    dc = np.linspace(-1.5, 1.5, n) * params.kappa
    da = np.linspace(-span_a, span_a, n) * params.gamma
    return dc, da


def scan_2d(params: SystemParams, probe: ProbeConfig, grids=None) -> SpectrumSurface:
    """Detected flux over a 2D detuning grid."""
    if grids is None:
        grids = default_grids(params, probe.mode)
    dc, da = (np.asarray(g, dtype=float) for g in grids)
    if dc.size == 0 or da.size == 0:
        raise ValueError("grids must be non-empty")
    DC, DA = np.meshgrid(dc, da, indexing="ij")
    values = reflected_flux(params, probe, DetuningPair(DC, DA))
    return SpectrumSurface(dc, da, values, probe.mode, params, probe)


def diagonal_grid(params: SystemParams, span_widths: float = 10.0, points: int = 801) -> np.ndarray:
    """Symmetric probe-atom detuning grid spanning ``span_widths`` times gamma (1 + C)."""
    half = span_widths * params.gamma * (1.0 + cooperativity(params))
    return np.linspace(-half, half, points)


def scan_diagonal(params: SystemParams, probe: ProbeConfig, grid=None) -> Spectrum1D:
    """Flux along delta_a = delta_c + (omega_c - omega_a), i.e. the probe alone is scanned."""
    if grid is None:
        grid = diagonal_grid(params)
    grid = np.asarray(grid, dtype=float)
    need = 10.0 * params.gamma * (1.0 + cooperativity(params)) * (1 - 1e-9)
    if grid.min() > -need or grid.max() < need:
        raise SpanError("diagonal grid must span at least +-10 gamma (1 + C)")
    values = reflected_flux(params, probe, DetuningPair.diagonal(params, grid))
    return Spectrum1D(grid, values, probe.mode, params)


def lorentzian(x, offset, amplitude, center, width):
    return offset + amplitude * width**2 / ((x - center) ** 2 + width**2)


def _rough_guess(x, y):
    edge = np.median(np.concatenate([y[: max(1, y.size // 20)], y[-max(1, y.size // 20):]]))
    k = int(np.argmax(np.abs(y - edge)))
    amp = y[k] - edge
    half = edge + 0.5 * amp
    inside = (y - half) * np.sign(amp) > 0
    # widest contiguous run around the extremum
    lo = k
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi = k
    while hi < y.size - 1 and inside[hi + 1]:
        hi += 1
    width = max(0.5 * (x[hi] - x[lo]), np.min(np.diff(x)))
    return edge, amp, x[k], width


def fit_lorentzian(x, y, initial_guess=None, max_iter: int = 200):
    """Fit ``offset + A w^2 / ((x - x0)^2 + w^2)``.

    Returns ``(params, errors, result)`` with ``params = (offset, A, x0, w)``
    and standard errors from the covariance scaled by the reduced
    chi-square.  Internally works in units where ``x ~ w`` and ``y ~ A``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 5:
        raise ValueError("need at least 5 points")
    guess = _rough_guess(x, y) if initial_guess is None else tuple(initial_guess)
    offset0, amp0, center0, width0 = guess
    if amp0 == 0 or np.ptp(y) == 0:
        raise FitError("spectrum is flat; no feature to fit")
    xs, ys = abs(width0), abs(amp0)
    u, v = (x - center0) / xs, y / ys

    def model(p):
        return lorentzian(u, p[0], p[1], p[2], p[3])

    res = least_squares(model, [offset0 / ys, amp0 / ys, 0.0, 1.0], v, x_scale=[1.0, 1.0, 1.0, 1.0], max_iter=max_iter)
    if not res.converged:
        raise FitError(f"Lorentzian fit did not converge ({res.message})", {"iterations": res.iterations})
    scale = np.array([ys, ys, xs, xs])
    p = res.params * scale
    p[2] += center0
    p[3] = abs(p[3])
    err = np.sqrt(np.abs(np.diag(res.covariance)) * res.chi2_reduced) * scale
    if p[3] <= 0:
        raise FitError("fitted width is zero")
    return p, err, res


def lorentzian_halfwidth(spectrum, initial_guess=None) -> tuple[float, float]:
    """Half-width at half-maximum of the dominant Lorentzian feature and its standard error.

    ``spectrum`` is a :class:`Spectrum1D` or an ``(x, y)`` pair.  The fit
    includes a constant offset so a slowly varying background need not be
    removed first; the amplitude is signed (negative for dips).
    """
    if isinstance(spectrum, Spectrum1D):
        x, y = spectrum.detuning, spectrum.values
    else:
        x, y = spectrum
    p, err, _ = fit_lorentzian(x, y, initial_guess)
    return float(p[3]), float(err[3])


def minima_locus(surface: SpectrumSurface, min_abs_dc: float | None = None) -> FeatureSet:
    """Delta_a of minimum flux in every column |delta_c| > 2 gamma of a reflection surface.

    Columns whose minimum sits on the grid edge are left out and listed in
    ``excluded_columns``.  Ties go to the smallest |delta_a|.
    """
    if surface.mode is not DriveMode.CAVITY:
        raise ValueError("minima locus is defined for reflection (cavity-drive) surfaces")
    params = surface.params
    if params.g == 0:
        return FeatureSet(no_coupling=True)
    step = float(np.max(np.diff(surface.delta_a))) if surface.delta_a.size > 1 else math.inf
    limit = params.gamma * (1.0 + cooperativity(params)) / 4.0
    if step > limit * (1 + 1e-9):
        raise ValueError(
            f"delta_a spacing {step / params.gamma:.3g} gamma is coarser than gamma (1 + C) / 4"
        )
    if min_abs_dc is None:
        min_abs_dc = 2.0 * params.gamma
    found, excluded = [], []
    last = surface.delta_a.size - 1
    order = np.argsort(np.abs(surface.delta_a), kind="stable")
    for i, dc in enumerate(surface.delta_c):
        if abs(dc) <= min_abs_dc:
            continue
        col = surface.values[i]
        lowest = col.min()
        j = int(order[np.flatnonzero(col[order] == lowest)[0]])
        if j in (0, last):
            excluded.append(float(dc))
            continue
        found.append((float(dc), float(surface.delta_a[j])))
    return FeatureSet(minima_locus=found, excluded_columns=excluded)


@dataclass(frozen=True)
class ButterflyPeaks:
    lower: float
    upper: float
    single_peak: bool


def _scaled_diagonal_power(params: SystemParams, delta):
    det = DetuningPair(params.kappa * np.asarray(delta), params.gamma * np.asarray(delta))
    return 1.0 / np.abs(atom_drive_denominator(params, det)) ** 2


def butterfly_peaks(params: SystemParams, points: int = 4001) -> ButterflyPeaks:
    """Maxima of the emitted power along delta_a/gamma = delta_c/kappa = delta.

    Grid search over delta followed by bounded scalar refinement around each
    candidate.  Below C = 1 a single central maximum exists and
    ``(0, 0, single_peak=True)`` is returned.
    """
    C = cooperativity(params)
    if C <= 1.0:
        return ButterflyPeaks(0.0, 0.0, True)
    reach = 2.0 * math.sqrt(C) + 2.0
    delta = np.linspace(-reach, reach, points)
    power = _scaled_diagonal_power(params, delta)
    step = delta[1] - delta[0]
    found = []
    for side in (delta < 0, delta > 0):
        idx = np.flatnonzero(side)
        k = idx[np.argmax(power[idx])]
        lo, hi = delta[max(k - 1, 0)], delta[min(k + 1, delta.size - 1)]
        res = minimize_scalar(
            lambda d: -_scaled_diagonal_power(params, d),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-10 * max(1.0, abs(delta[k]))},
        )
        found.append(float(res.x))
    if abs(found[1] - found[0]) < 2 * step:
        return ButterflyPeaks(0.0, 0.0, True)
    return ButterflyPeaks(found[0], found[1], False)
