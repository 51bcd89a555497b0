"""Coupled atom-cavity parameters and the single-excitation normal modes.

All frequencies are angular frequencies in rad/s.  ``kappa`` and ``gamma``
are field (amplitude) half-decay rates: the cavity photon number decays at
``2*kappa`` and the excited-state population at ``2*gamma``.

The single-excitation block of the damped Hamiltonian, in the ordered basis
(atom excited, one photon), is::

    [[omega_a - i*gamma,  -g               ],
     [-g,                  omega_c - i*kappa]]
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

#: One MHz of ordinary frequency expressed as an angular frequency.
MHZ = 2.0 * math.pi * 1e6


class RegimeError(ValueError):
    """Raised when the three-regime taxonomy does not apply (kappa <= gamma)."""


@dataclass(frozen=True)
class SystemParams:
    """Rates and bare resonances of one atom (or ensemble) in one cavity mode.

    ``g`` is the coupling as seen by the cavity mode; for an ensemble it is
    the collective value ``g*sqrt(N_eff)``, supplied directly.
    """

    g: float
    kappa: float
    gamma: float
    omega_c: float = 0.0
    omega_a: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "omega_c", "omega_a"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.kappa <= 0 or self.gamma <= 0:
            raise ValueError("kappa and gamma must be > 0")

    @classmethod
    def from_mhz(cls, g, kappa, gamma, omega_c=0.0, omega_a=0.0) -> "SystemParams":
        """Build from ordinary frequencies in MHz (value / 2pi)."""
        return cls(g * MHZ, kappa * MHZ, gamma * MHZ, omega_c * MHZ, omega_a * MHZ)

    @classmethod
    def from_cooperativity(cls, C, kappa, gamma, omega_c=0.0, omega_a=0.0) -> "SystemParams":
        if C < 0:
            raise ValueError(f"cooperativity must be >= 0, got {C}")
        return cls(math.sqrt(C * kappa * gamma), kappa, gamma, omega_c, omega_a)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @property
    def detuning(self) -> float:
        """Cavity-atom detuning ``omega_c - omega_a``."""
        return self.omega_c - self.omega_a

    def matrix(self) -> np.ndarray:
        """Single-excitation block of the damped Hamiltonian, basis (atom, photon)."""
        return np.array(
            [
                [self.omega_a - 1j * self.gamma, -self.g],
                [-self.g, self.omega_c - 1j * self.kappa],
            ],
            dtype=complex,
        )

    def to_mhz(self) -> dict:
        return {k: getattr(self, k) / MHZ for k in ("g", "kappa", "gamma", "omega_c", "omega_a")}


def cooperativity(params: SystemParams) -> float:
    """C = g**2 / (kappa * gamma)."""
    return params.g**2 / (params.kappa * params.gamma)


def undamped_eigenfrequencies(params: SystemParams) -> tuple[float, float]:
    """Dressed frequencies of the lossless single-excitation doublet.

    Returns ``(omega_plus, omega_minus)`` with ``omega_plus >= omega_minus``.
    On resonance the splitting is exactly ``2*g``.
    """
    half = 0.5 * params.detuning
    root = math.hypot(params.g, half)
    return params.omega_a + half + root, params.omega_a + half - root


class Tag(str, enum.Enum):
    PURCELL = "Purcell"
    INTERMEDIATE = "Intermediate"
    STRONG = "StrongCoupling"


@dataclass(frozen=True)
class Regime:
    tag: Tag
    g_ep: float
    g_sc: float


def regime_boundaries(kappa: float, gamma: float) -> tuple[float, float]:
    """Exceptional-point coupling and the resolved-splitting threshold."""
    return 0.5 * (kappa - gamma), math.sqrt(0.5 * (kappa**2 + gamma**2))


def classify_regime(params: SystemParams) -> Regime:
    """Purcell for g < g_ep, Intermediate for g_ep <= g < g_sc, else StrongCoupling."""
    if params.kappa <= params.gamma:
        raise RegimeError(
            f"regime classification assumes kappa > gamma (kappa={params.kappa}, gamma={params.gamma})"
        )
    g_ep, g_sc = regime_boundaries(params.kappa, params.gamma)
    if params.g < g_ep:
        tag = Tag.PURCELL
    elif params.g < g_sc:
        tag = Tag.INTERMEDIATE
    else:
        tag = Tag.STRONG
    return Regime(tag, g_ep, g_sc)


_NAN_PAIR = (math.nan, math.nan)


@dataclass(frozen=True)
class ComplexModePair:
    """Two damped normal modes.

    ``mixing_*`` are the normalised weights ``(|c_atom|**2, |c_photon|**2)``
    of the right eigenvector.  At an exceptional point the eigenvectors
    coalesce, ``degenerate`` is set and the weights are NaN.
    """

    omega_plus: complex
    omega_minus: complex
    mixing_plus: tuple[float, float]
    mixing_minus: tuple[float, float]
    degenerate: bool = False

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return self.omega_plus, self.omega_minus

    @property
    def widths(self) -> tuple[float, float]:
        """Damping rates ``-Im`` of the (+, -) branches."""
        return -self.omega_plus.imag, -self.omega_minus.imag


def eigen_radicand(params: SystemParams) -> complex:
    """``g**2 + ((omega_c - omega_a - i(kappa - gamma)) / 2)**2``; zero at the exceptional point."""
    half = 0.5 * complex(params.detuning, -(params.kappa - params.gamma))
    return params.g**2 + half * half


def _scale(params: SystemParams) -> float:
    return abs(params.g) + params.kappa + params.gamma + abs(params.detuning)


def _order(lam1: complex, lam2: complex, tol: float) -> tuple[complex, complex]:
    """Apply the branch convention: + has the larger real part; on a tie, the larger width."""
    if abs(lam1.real - lam2.real) <= tol:
        return (lam1, lam2) if -lam1.imag >= -lam2.imag else (lam2, lam1)
    return (lam1, lam2) if lam1.real > lam2.real else (lam2, lam1)


def _mixing(params: SystemParams, lam: complex) -> tuple[float, float]:
    # Either row of (M - lam) v = 0 gives v; take the better-conditioned one.
    v1 = (params.g, params.omega_a - 1j * params.gamma - lam)
    v2 = (params.omega_c - 1j * params.kappa - lam, params.g)
    n1 = abs(v1[0]) ** 2 + abs(v1[1]) ** 2
    n2 = abs(v2[0]) ** 2 + abs(v2[1]) ** 2
    v, n = (v1, n1) if n1 >= n2 else (v2, n2)
    if n == 0.0:
        return _NAN_PAIR
    atom = abs(v[0]) ** 2 / n
    return atom, 1.0 - atom


def damped_eigenvalues(params: SystemParams, ep_tol: float = 1e-12) -> ComplexModePair:
    """Complex normal-mode frequencies of the damped coupled system.

    Closed-form roots of the 2x2 characteristic polynomial, measured from
    ``omega_a``.  The root of larger modulus is taken from the quadratic
    formula and the other from the product of roots, which is the same
    expression without the cancellation that hurts the narrow mode when
    ``kappa >> gamma``.
    """
    gam, kap = params.gamma, params.kappa
    half_sum = 0.5 * complex(params.detuning, -(kap + gam))
    root = complex(np.sqrt(eigen_radicand(params)))
    # product of the two roots (frame of omega_a): (-i gamma)(Delta - i kappa) - g^2
    product = -1j * gam * complex(params.detuning, -kap) - params.g**2
    big = half_sum + root if abs(half_sum + root) >= abs(half_sum - root) else half_sum - root
    small = product / big if big != 0 else half_sum
    scale = _scale(params)
    lam_p, lam_m = _order(big + params.omega_a, small + params.omega_a, 1e-13 * scale)
    if abs(lam_p - lam_m) <= ep_tol * scale:
        return ComplexModePair(lam_p, lam_m, _NAN_PAIR, _NAN_PAIR, degenerate=True)
    return ComplexModePair(lam_p, lam_m, _mixing(params, lam_p), _mixing(params, lam_m))


def eigensolve_2x2(params: SystemParams, ep_tol: float = 1e-7) -> ComplexModePair:
    """Numerical diagonalisation of the single-excitation matrix.

    Independent of :func:`damped_eigenvalues`; used to cross-check it.  The
    default ``ep_tol`` reflects the square-root sensitivity of nearly
    defective matrices.
    """
    M = params.matrix()
    vals, vecs = np.linalg.eig(M)
    scale = _scale(params)
    if abs(vals[0] - vals[1]) <= ep_tol * scale:
        mean = complex(0.5 * (vals[0] + vals[1]))
        return ComplexModePair(mean, mean, _NAN_PAIR, _NAN_PAIR, degenerate=True)
    weights = []
    for k in range(2):
        col = np.abs(vecs[:, k]) ** 2
        col = col / col.sum()
        weights.append((float(col[0]), float(col[1])))
    lam = [complex(v) for v in vals]
    first, second = _order(lam[0], lam[1], 1e-10 * scale)
    if first == lam[0]:
        return ComplexModePair(first, second, weights[0], weights[1])
    return ComplexModePair(first, second, weights[1], weights[0])


def sweep_eigenvalues(base: SystemParams, g_values: Sequence[float]) -> np.ndarray:
    """Damped eigenvalues along a sweep of ``g``, tracked for continuity.

    The first point follows the branch convention; every later point is
    assigned to the branch whose previous value is nearest.  Returns a
    complex array of shape ``(len(g_values), 2)`` with columns (+, -).
    """
    out = np.empty((len(g_values), 2), dtype=complex)
    prev = None
    for i, g in enumerate(g_values):
        pair = damped_eigenvalues(base.with_(g=float(g)))
        cur = np.array(pair.eigenvalues)
        if prev is not None:
            straight = abs(cur[0] - prev[0]) + abs(cur[1] - prev[1])
            swapped = abs(cur[1] - prev[0]) + abs(cur[0] - prev[1])
            if swapped < straight:
                cur = cur[::-1]
        out[i] = cur
        prev = cur
    return out
