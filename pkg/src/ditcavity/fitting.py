"""Photon-count surfaces: Poisson synthesis and the two-parameter (C, amplitude) fit.

Count model per pixel and per realisation::

    mean = amplitude * shape(dc, da; C)

``shape`` is :func:`~ditcavity.steady_state.normalized_flux`; for reflection
it tends to ``R1`` far off resonance, so the amplitude is the off-resonant
count level.  kappa, gamma and the cavity-atom detuning are held fixed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .leastsq import FitError, SingularFitError, least_squares
from .model import SystemParams
from .spectra import SpectrumSurface, fit_lorentzian
from .steady_state import DetuningPair, DriveMode, ProbeConfig, normalized_flux

#: Largest total count per pixel we accept (int64 headroom).
MAX_TOTAL_COUNTS = 2**53


@dataclass
class CountSurface:
    """Photocounts on a detuning grid.

    ``counts`` holds the total over ``realisations`` repeated exposures, so
    ``counts / realisations`` is the per-exposure mean.  Measured and
    Poisson-synthesised data are integers; model-expected data (``expected``)
    may be fractional.
    """

    delta_c: np.ndarray
    delta_a: np.ndarray
    counts: np.ndarray
    exposure: float
    realisations: int = 1
    mode: DriveMode = DriveMode.CAVITY
    seed: int | None = None
    params: SystemParams | None = None
    probe: ProbeConfig | None = None
    expected: bool = False

    def __post_init__(self):
        self.mode = DriveMode.parse(self.mode)
        self.delta_c = np.asarray(self.delta_c, dtype=float)
        self.delta_a = np.asarray(self.delta_a, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (self.delta_c.size, self.delta_a.size):
            raise ValueError("counts shape must be (len(delta_c), len(delta_a))")
        if not self.exposure > 0:
            raise ValueError("exposure must be > 0")
        if self.realisations < 1:
            raise ValueError("realisations must be >= 1")
        if not np.all(np.isfinite(self.counts)) or np.any(self.counts < 0):
            raise ValueError("counts must be finite and non-negative")
        if not self.expected:
            if not np.all(self.counts == np.round(self.counts)):
                raise ValueError("counts must be integers")
            self.counts = self.counts.astype(np.int64)

    @property
    def mean_counts(self) -> np.ndarray:
        return self.counts / self.realisations

    def variance(self) -> np.ndarray:
        """Variance of the per-exposure mean: max(mean, 1) / realisations."""
        return np.maximum(self.mean_counts, 1.0) / self.realisations


def _mean_counts(surface: SpectrumSurface, amplitude: float, exposure: float) -> np.ndarray:
    if exposure <= 0:
        raise ValueError("exposure must be > 0")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    return amplitude * surface.values * exposure


def synthesize_counts(
    surface: SpectrumSurface,
    amplitude: float,
    exposure: float,
    realisations: int = 40,
    seed: int = 0,
) -> CountSurface:
    """Draw ``realisations`` Poisson exposures per pixel and store their integer total."""
    mean = _mean_counts(surface, amplitude, exposure)
    if not np.all(np.isfinite(mean)) or mean.max(initial=0.0) * realisations > MAX_TOTAL_COUNTS:
        raise OverflowError("mean counts exceed the counter range")
    rng = np.random.default_rng(seed)
    total = np.zeros(mean.shape, dtype=np.int64)
    for _ in range(realisations):
        total += rng.poisson(mean)
    return CountSurface(
        surface.delta_c, surface.delta_a, total, exposure, realisations,
        surface.mode, seed, surface.params, surface.probe,
    )


def expected_counts(
    surface: SpectrumSurface, amplitude: float, exposure: float, realisations: int = 40
) -> CountSurface:
    """Noise-free counterpart of :func:`synthesize_counts` (fractional totals)."""
    mean = _mean_counts(surface, amplitude, exposure)
    return CountSurface(
        surface.delta_c, surface.delta_a, mean * realisations, exposure, realisations,
        surface.mode, None, surface.params, surface.probe, expected=True,
    )


@dataclass
class FitResult:
    C_hat: float
    amplitude_hat: float
    residual_norm: float
    iterations: int
    converged: bool
    covariance: list
    mode: str
    g_hat: float
    kappa: float
    gamma: float
    detuning: float
    message: str = ""
    parametrization: str = "C"
    diagnostics: dict = field(default_factory=dict)

    def correlation(self) -> float:
        cov = np.asarray(self.covariance)
        return float(cov[0, 1] / math.sqrt(cov[0, 0] * cov[1, 1]))

    def to_dict(self) -> dict:
        return asdict(self)


def _fixed_from(data: CountSurface, fixed: dict | None) -> dict:
    out = {}
    if data.params is not None:
        out.update(kappa=data.params.kappa, gamma=data.params.gamma, detuning=data.params.detuning)
    if data.probe is not None:
        out.update(kappa_T=data.probe.kappa_T, R1=data.probe.R1, R2=data.probe.R2)
    out.update(fixed or {})
    for key in ("kappa", "gamma"):
        if key not in out:
            raise ValueError(f"fixed value for {key} is required")
    out.setdefault("detuning", 0.0)
    return out


def surface_shape(
    data: CountSurface, C: float, fixed: dict, mode: DriveMode | None = None
) -> np.ndarray:
    """Normalised flux on the data grid for cooperativity ``C`` and the fixed rates."""
    mode = data.mode if mode is None else DriveMode.parse(mode)
    kappa, gamma = fixed["kappa"], fixed["gamma"]
    params = SystemParams(math.sqrt(max(C, 0.0) * kappa * gamma), kappa, gamma, omega_c=fixed["detuning"])
    common = dict(kappa_T=fixed.get("kappa_T"), R1=fixed.get("R1", 1.0), R2=fixed.get("R2", 1.0))
    probe = ProbeConfig.cavity(1.0, **common) if mode is DriveMode.CAVITY else ProbeConfig.atom(1.0, **common)
    DC, DA = np.meshgrid(data.delta_c, data.delta_a, indexing="ij")
    return normalized_flux(params, probe, DetuningPair(DC, DA))


def initial_guess(data: CountSurface, fixed: dict, mode: DriveMode | None = None) -> tuple[float, float]:
    """Starting (C0, A0).

    C0 = w/gamma - 1 from a Lorentzian fit along the column nearest the
    diagonal delta_a = delta_c (floored at 0.1; 1 if that fit fails).  For
    reflection A0 is the mean of the four corner pixels; for emission the
    corners carry no signal, so A0 scales the peak count by the resonant
    shape value at C0.
    """
    mode = data.mode if mode is None else DriveMode.parse(mode)
    mean = data.mean_counts.astype(float)
    i = int(np.argmin(np.abs(data.delta_c + fixed["detuning"])))
    try:
        p, _, _ = fit_lorentzian(data.delta_a, mean[i])
        C0 = max(p[3] / fixed["gamma"] - 1.0, 0.1)
    except (FitError, ValueError):
        C0 = 1.0
    if not math.isfinite(C0) or C0 > 1e3:
        C0 = 1.0
    if mode is DriveMode.CAVITY:
        A0 = float(np.mean([mean[0, 0], mean[0, -1], mean[-1, 0], mean[-1, -1]]))
    else:
        shape = surface_shape(data, C0, fixed, mode)
        A0 = float(mean.max() / shape.max()) if shape.max() > 0 else float(mean.max())
    return C0, A0


def fit_surface(
    data: CountSurface,
    mode: DriveMode | str | None = None,
    fixed: dict | None = None,
    init: dict | tuple | None = None,
    parametrization: str = "C",
    max_iter: int = 200,
) -> FitResult:
    """Fit cooperativity and amplitude to a count surface.

    Residuals are weighted by the Poisson variance of the per-exposure mean.
    ``fixed`` supplies ``kappa``, ``gamma``, ``detuning`` (omega_c -
    omega_a) and optionally ``kappa_T``, ``R1``, ``R2``; missing entries are
    taken from the parameters stored with ``data``.  ``parametrization="g"``
    fits the coupling instead of C.  A run that hits ``max_iter`` returns
    the best iterate with ``converged=False``.
    """
    mode = data.mode if mode is None else DriveMode.parse(mode)
    fixed = _fixed_from(data, fixed)
    kg = fixed["kappa"] * fixed["gamma"]
    if init is None:
        C0, A0 = initial_guess(data, fixed, mode)
    elif isinstance(init, dict):
        C0, A0 = init["C"], init["A"]
    else:
        C0, A0 = init
    if not C0 >= 0:
        raise ValueError("initial cooperativity must be >= 0")
    if not A0 > 0:
        raise SingularFitError("initial amplitude is zero; the model is flat", {"A0": A0})
    mean = data.mean_counts.astype(float)
    weights = 1.0 / data.variance()

    # to_scale sets the finite-difference scale when the start sits on the bound
    if parametrization == "C":
        to_C, p_first, to_scale = (lambda x: x), C0, 1.0
    elif parametrization == "g":
        to_C, p_first, to_scale = (lambda x: x * x / kg), math.sqrt(C0 * kg), math.sqrt(kg)
    else:
        raise ValueError("parametrization must be 'C' or 'g'")

    # amplitude is fitted relative to A0 so both parameters are O(1)
    def model(p):
        return p[1] * A0 * surface_shape(data, to_C(p[0]), fixed, mode)

    res = least_squares(
        model, [p_first, 1.0], mean, weights,
        lower=[0.0, 0.0], max_iter=max_iter, x_scale=[p_first or to_scale, 1.0],
    )
    first, rel_amp = res.params
    C_hat = float(to_C(first))
    g_hat = float(math.sqrt(max(C_hat, 0.0) * kg))
    # covariance in (C, A)
    jac = np.diag([1.0 if parametrization == "C" else 2.0 * first / kg, A0])
    cov = jac @ res.covariance @ jac.T
    return FitResult(
        C_hat=C_hat,
        amplitude_hat=float(rel_amp * A0),
        residual_norm=float(res.chi2_reduced),
        iterations=res.iterations,
        converged=bool(res.converged),
        covariance=cov.tolist(),
        mode=mode.value,
        g_hat=g_hat,
        kappa=float(fixed["kappa"]),
        gamma=float(fixed["gamma"]),
        detuning=float(fixed["detuning"]),
        message=res.message,
        parametrization=parametrization,
        diagnostics={"grad_norm": res.grad_norm, "n_eval": res.n_eval, "init": [float(C0), float(A0)]},
    )


def model_counts(result: FitResult, data: CountSurface, fixed: dict | None = None) -> np.ndarray:
    """Per-exposure mean counts predicted by a fit on the grid of ``data``."""
    fx = _fixed_from(data, fixed)
    fx.update(kappa=result.kappa, gamma=result.gamma, detuning=result.detuning)
    return result.amplitude_hat * surface_shape(data, result.C_hat, fx, DriveMode.parse(result.mode))
