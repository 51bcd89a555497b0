"""Time-domain oracle: fixed-step RK4 integration of the linear equations of motion.

The equations are integrated in the frame rotating at the probe frequency::

    d sigma/dt = -(gamma - i da) sigma + i g a  [+ i Omega/2]
    d a/dt     = -(kappa - i dc) a + i g sigma  [+ eta]

Because the right-hand side is affine with constant coefficients, one RK4
step is an affine map.  The map is built by applying the four RK4 stages to
the basis vectors and then iterated in blocks of precomputed powers, which
yields the same sequence of RK4 iterates without a Python loop per step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SystemParams, cooperativity, damped_eigenvalues
from .steady_state import (
    DetuningPair,
    FieldPair,
    ProbeConfig,
    drift_matrix,
    drive_vector,
    field_cavity_drive,
    steady_field,
)

MAX_KAPPA_DT = 0.05
DEFAULT_KAPPA_DT = 0.02
_BLOCK = 1024


class IntegrationError(RuntimeError):
    """Non-finite state produced during integration."""


class StepSizeError(ValueError):
    pass


class PhaseUnwrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    a: np.ndarray
    sigma: np.ndarray
    probe: ProbeConfig
    det: DetuningPair

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def rk4_step(f, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_map(A: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """Augmented 3x3 matrix of one RK4 step for y' = A y + b."""
    homogeneous = lambda t, y: A @ y  # noqa: E731
    affine = lambda t, y: A @ y + b  # noqa: E731
    T = np.zeros((3, 3), dtype=complex)
    for k in range(2):
        e = np.zeros(2, dtype=complex)
        e[k] = 1.0
        T[:2, k] = rk4_step(homogeneous, 0.0, e, h)
    T[:2, 2] = rk4_step(affine, 0.0, np.zeros(2, dtype=complex), h)
    T[2, 2] = 1.0
    return T


def integrate(
    params: SystemParams,
    probe: ProbeConfig,
    det: DetuningPair,
    initial: FieldPair | None = None,
    duration: float = None,
    dt: float | None = None,
    stride: int = 1,
) -> Trajectory:
    """Integrate from ``initial`` (default: empty cavity, ground-state atom).

    ``dt`` defaults to ``0.02/kappa`` and may not exceed ``0.05/kappa``; it
    is shrunk slightly so that a whole number of steps spans ``duration``.
    Only every ``stride``-th state is stored.
    """
    if duration is None or not duration > 0:
        raise ValueError("duration must be > 0")
    if dt is None:
        dt = DEFAULT_KAPPA_DT / params.kappa
    if not dt > 0 or dt * params.kappa > MAX_KAPPA_DT * (1 + 1e-12):
        raise StepSizeError(f"dt must satisfy 0 < kappa*dt <= {MAX_KAPPA_DT}, got {dt * params.kappa:g}")
    A = drift_matrix(params, complex(det.delta_c), complex(det.delta_a))
    b = drive_vector(params, probe)
    if dt * np.max(np.abs(np.linalg.eigvals(A))) > 2.5:
        raise StepSizeError("dt too large for the fastest rotation/decay (|lambda| dt > 2.5)")
    stride = max(1, int(stride))
    n_stored = max(1, math.ceil(duration / (dt * stride) - 1e-9))
    h = duration / (n_stored * stride)

    z = np.zeros(3, dtype=complex)
    if initial is not None:
        z[0], z[1] = initial.sigma, initial.a
    z[2] = 1.0

    T = np.linalg.matrix_power(_step_map(A, b, h), stride)
    n_points = n_stored + 1
    K = min(_BLOCK, n_points)
    powers = np.empty((K, 3, 3), dtype=complex)
    powers[0] = np.eye(3)
    for k in range(1, K):
        powers[k] = T @ powers[k - 1]
    TK = T @ powers[K - 1]

    states = np.empty((n_points, 3), dtype=complex)
    # overflow is detected explicitly below, so numpy's own warning is redundant
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, n_points, K):
            stop = min(start + K, n_points)
            states[start:stop] = powers[: stop - start] @ z
            if not np.all(np.isfinite(states[start:stop])):
                raise IntegrationError(f"non-finite state near t = {start * stride * h:g} s")
            z = TK @ z
    times = np.arange(n_points) * (stride * h)
    return Trajectory(times, states[:, 1].copy(), states[:, 0].copy(), probe, det)


def fit_decay_rate(times: np.ndarray, values: np.ndarray, window: tuple[float, float]) -> float:
    """Least-squares slope of ``-ln(values)`` over ``window``; uniform weights."""
    t0, t1 = window
    sel = (times >= t0) & (times <= t1)
    if sel.sum() < 3:
        raise ValueError("fewer than 3 samples inside the fit window")
    y = values[sel]
    if np.any(y <= 0):
        raise ValueError("signal underflowed to zero inside the fit window")
    slope, _ = np.polyfit(times[sel], np.log(y), 1)
    return -float(slope)


def _resonant_detuning(params: SystemParams) -> DetuningPair:
    # probe on the atomic line; equals (0, 0) when omega_c == omega_a
    return DetuningPair(params.omega_a - params.omega_c, 0.0)


def expected_slow_rate(params: SystemParams, observable: str = "cavity") -> float:
    """Twice the smallest damping rate among modes visible in ``observable``."""
    pair = damped_eigenvalues(params)
    rates = []
    for lam, weights in ((pair.omega_plus, pair.mixing_plus), (pair.omega_minus, pair.mixing_minus)):
        visible = pair.degenerate or observable == "total" or weights[1] > 1e-12
        if visible:
            rates.append(-2.0 * lam.imag)
    return min(rates)


def ringdown_rate(
    params: SystemParams,
    probe: ProbeConfig,
    fit_window: tuple[float, float] | None = None,
    dt: float | None = None,
    initial: FieldPair | None = None,
    observable: str = "cavity",
) -> float:
    """Decay rate of the intracavity power after a resonant drive is switched off.

    The system starts in the steady state of the resonant drive (or
    ``initial``) and evolves freely.  ``observable`` is ``"cavity"`` for
    ``|a|**2`` or ``"total"`` for ``|a|**2 + |sigma|**2``.  The default
    window is ``[5/kappa, 5/kappa + 3/(2 gamma (1 + C))]``.
    """
    if observable not in ("cavity", "total"):
        raise ValueError("observable must be 'cavity' or 'total'")
    det = _resonant_detuning(params)
    if initial is None:
        initial = steady_field(params, probe, det)
    if fit_window is None:
        t0 = 5.0 / params.kappa
        fit_window = (t0, t0 + 3.0 / (2.0 * params.gamma * (1.0 + cooperativity(params))))
    t0, t1 = fit_window
    if t0 < 5.0 / params.kappa * (1 - 1e-12):
        raise ValueError("fit window must start at or after 5/kappa")
    expected = expected_slow_rate(params, observable)
    if (t1 - t0) * expected < 3.0 * (1 - 1e-9):
        raise ValueError(
            f"fit window spans {(t1 - t0) * expected:.3g} decay constants; at least 3 required"
        )
    off = ProbeConfig(mode=probe.mode, kappa_T=probe.kappa_T, R1=probe.R1, R2=probe.R2)
    n_steps = t1 / (dt or DEFAULT_KAPPA_DT / params.kappa)
    traj = integrate(params, off, det, initial, duration=t1, dt=dt, stride=max(1, int(n_steps // 20000)))
    power = np.abs(traj.a) ** 2
    if observable == "total":
        power = power + np.abs(traj.sigma) ** 2
    return fit_decay_rate(traj.times, power, fit_window)


def group_delay_closed_form(params: SystemParams) -> float:
    """Group delay of the cavity transfer function on resonance (omega_c = omega_a)."""
    g2 = params.g**2
    return (1.0 - g2 / params.gamma**2) / (params.kappa * (1.0 + g2 / (params.kappa * params.gamma)))


def group_delay_numeric(params: SystemParams, domega: float | None = None) -> float:
    """Central finite difference of ``arg(a/eta)`` about the atomic resonance.

    Both detunings move together with the probe.  Successive phase samples
    are unwrapped; a step that still exceeds pi/2 after unwrapping means the
    sampling is too coarse and raises :class:`PhaseUnwrapError`.
    """
    if domega is None:
        domega = params.gamma / 1000.0
    if not 0 < domega <= params.gamma / 100.0 * (1 + 1e-12):
        raise ValueError("domega must satisfy 0 < domega <= gamma/100")
    offsets = np.array([-domega, 0.0, domega])
    det = DetuningPair(offsets - params.detuning, offsets)
    transfer = field_cavity_drive(params, ProbeConfig.cavity(), det, eta=1.0).a
    phase = np.angle(transfer)
    steps = np.diff(phase)
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if np.any(np.abs(steps) > 0.5 * np.pi):
        raise PhaseUnwrapError("phase changes by more than pi/2 between samples; reduce domega")
    return float(steps.sum() / (2.0 * domega))

