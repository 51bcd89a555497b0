"""Weak-excitation steady states under cavity or atom driving, and the output flux.

Functions broadcast over array-valued detunings.  Detunings are probe minus
resonance (``delta_c = omega_p - omega_c``, ``delta_a = omega_p - omega_a``)
and may be complex, which is how the pole structure is probed.

Conventions: ``a`` is the coherent intracavity amplitude, so ``|a|**2`` is a
mean photon number; the cavity drive is ``eta = sqrt(2 kappa_T j_in)`` with
``j_in`` in photons/s, and ``sqrt(kappa) * a`` carries sqrt(photons/s).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import SystemParams

WEAK_EXCITATION_LIMIT = 0.1


class WeakExcitationWarning(UserWarning):
    """Atomic excitation too large for the linear (weak-drive) model."""


class DriveMode(str, enum.Enum):
    CAVITY = "cavity"
    ATOM = "atom"

    @classmethod
    def parse(cls, value) -> "DriveMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"cavitydrive": "cavity", "atomdrive": "atom"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class ProbeConfig:
    """How the system is driven and how the output is collected.

    ``j_in`` (photons/s) is used only for cavity driving, ``rabi`` (the probe
    Rabi frequency Omega, rad/s) only for atom driving.  ``kappa_T`` is the
    input-mirror share of ``kappa``; ``None`` means ``kappa / 2``.
    """

    mode: DriveMode = DriveMode.CAVITY
    j_in: float = 0.0
    rabi: float = 0.0
    kappa_T: float | None = None
    R1: float = 1.0
    R2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", DriveMode.parse(self.mode))
        for name in ("R1", "R2"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {r}")
        if self.j_in < 0 or self.rabi < 0:
            raise ValueError("j_in and rabi must be non-negative")
        if self.kappa_T is not None and self.kappa_T <= 0:
            raise ValueError("kappa_T must be > 0")
        if self.mode is DriveMode.CAVITY and self.rabi != 0.0:
            raise ValueError("cavity drive takes j_in; rabi must be 0")
        if self.mode is DriveMode.ATOM and self.j_in != 0.0:
            raise ValueError("atom drive takes rabi; j_in must be 0")

    @classmethod
    def cavity(cls, j_in: float = 1.0, **kw) -> "ProbeConfig":
        return cls(mode=DriveMode.CAVITY, j_in=j_in, **kw)

    @classmethod
    def atom(cls, rabi: float = 1.0, **kw) -> "ProbeConfig":
        return cls(mode=DriveMode.ATOM, rabi=rabi, **kw)

    def with_(self, **changes) -> "ProbeConfig":
        return replace(self, **changes)

    def kappa_in(self, params: SystemParams) -> float:
        kt = 0.5 * params.kappa if self.kappa_T is None else self.kappa_T
        if kt > params.kappa * (1 + 1e-12):
            raise ValueError(f"kappa_T ({kt}) exceeds kappa ({params.kappa})")
        return kt

    def eta(self, params: SystemParams) -> float:
        """Cavity drive amplitude, eta**2 = 2 kappa_T j_in."""
        if self.mode is not DriveMode.CAVITY:
            return 0.0
        return math.sqrt(2.0 * self.kappa_in(params) * self.j_in)


@dataclass(frozen=True)
class DetuningPair:
    delta_c: object
    delta_a: object

    @classmethod
    def from_probe(cls, params: SystemParams, omega_p) -> "DetuningPair":
        omega_p = np.asarray(omega_p)
        return cls(omega_p - params.omega_c, omega_p - params.omega_a)

    @classmethod
    def diagonal(cls, params: SystemParams, delta_a) -> "DetuningPair":
        """Probe scanned with the cavity-atom detuning held at ``params.detuning``."""
        delta_a = np.asarray(delta_a)
        return cls(delta_a - params.detuning, delta_a)


@dataclass(frozen=True)
class FieldPair:
    a: object
    sigma: object


def _check_excitation(sigma) -> None:
    if np.any(np.abs(sigma) ** 2 > WEAK_EXCITATION_LIMIT):
        warnings.warn(
            f"|sigma|^2 exceeds {WEAK_EXCITATION_LIMIT}: weak-excitation model not valid",
            WeakExcitationWarning,
            stacklevel=3,
        )


def _atom_response(params: SystemParams, delta_a):
    resp = params.gamma - 1j * np.asarray(delta_a)
    if np.any(resp == 0):
        raise ZeroDivisionError("gamma - i*delta_a vanishes")
    return resp


def field_cavity_drive(
    params: SystemParams, probe: ProbeConfig, det: DetuningPair, eta=None
) -> FieldPair:
    """Steady state under a cavity drive.

    ``a = eta / ((kappa - i dc) + g^2 / (gamma - i da))`` and
    ``sigma = i g a / (gamma - i da)``.  ``eta`` may be given explicitly
    (e.g. a complex effective drive); by default it comes from ``probe``.
    """
    if eta is None:
        if probe.mode is not DriveMode.CAVITY:
            raise ValueError("field_cavity_drive needs a cavity-drive probe")
        eta = probe.eta(params)
    resp = _atom_response(params, det.delta_a)
    a = eta / ((params.kappa - 1j * np.asarray(det.delta_c)) + params.g**2 / resp)
    sigma = 1j * params.g * a / resp
    _check_excitation(sigma)
    return FieldPair(a, sigma)


def atom_drive_denominator(params: SystemParams, det: DetuningPair):
    """``(kappa - i dc)(gamma - i da) + g^2``; vanishes at the complex normal modes."""
    return (params.kappa - 1j * np.asarray(det.delta_c)) * (
        params.gamma - 1j * np.asarray(det.delta_a)
    ) + params.g**2


def field_atom_drive(params: SystemParams, probe: ProbeConfig, det: DetuningPair) -> FieldPair:
    """Steady state when the atoms are driven from the side with Rabi frequency Omega.

    ``a = -(g Omega / 2) / ((kappa - i dc)(gamma - i da) + g^2)`` and
    ``sigma = i (g a + Omega / 2) / (gamma - i da)``.
    """
    if probe.mode is not DriveMode.ATOM:
        raise ValueError("field_atom_drive needs an atom-drive probe")
    half_rabi = 0.5 * probe.rabi
    resp = _atom_response(params, det.delta_a)
    a = -params.g * half_rabi / atom_drive_denominator(params, det)
    sigma = 1j * (params.g * a + half_rabi) / resp
    _check_excitation(sigma)
    return FieldPair(a, sigma)


def drift_matrix(params: SystemParams, delta_c: complex, delta_a: complex) -> np.ndarray:
    """Linear equations of motion d/dt (sigma, a) = A (sigma, a) + b, probe frame."""
    return np.array(
        [
            [-(params.gamma - 1j * delta_a), 1j * params.g],
            [1j * params.g, -(params.kappa - 1j * delta_c)],
        ],
        dtype=complex,
    )


def drive_vector(params: SystemParams, probe: ProbeConfig) -> np.ndarray:
    if probe.mode is DriveMode.CAVITY:
        return np.array([0.0, probe.eta(params)], dtype=complex)
    return np.array([0.5j * probe.rabi, 0.0], dtype=complex)


def steady_state_linear(params: SystemParams, probe: ProbeConfig, det: DetuningPair) -> FieldPair:
    """Fixed point of the equations of motion by direct 2x2 solve (scalar detunings).

    Independent of the closed forms; used to cross-check their signs.
    """
    A = drift_matrix(params, complex(det.delta_c), complex(det.delta_a))
    sigma, a = np.linalg.solve(A, -drive_vector(params, probe))
    return FieldPair(complex(a), complex(sigma))


def steady_field(params: SystemParams, probe: ProbeConfig, det: DetuningPair) -> FieldPair:
    if probe.mode is DriveMode.CAVITY:
        return field_cavity_drive(params, probe, det)
    return field_atom_drive(params, probe, det)


def effective_drive(params: SystemParams, probe: ProbeConfig, det: DetuningPair):
    """Drive the side-pumped atoms exert on the cavity: ``-(g Omega/2) / (gamma - i da)``."""
    if probe.mode is not DriveMode.ATOM:
        raise ValueError("effective_drive applies to atom driving")
    return -params.g * 0.5 * probe.rabi / _atom_response(params, det.delta_a)


def reflected_flux(params: SystemParams, probe: ProbeConfig, det: DetuningPair):
    """Detected flux ``|-sqrt(R1 j) + sqrt(R2 kappa) a|**2`` in photons/s.

    For atom driving ``j = 0`` and this is ``R2 kappa |a|**2``.
    """
    a = steady_field(params, probe, det).a
    j = probe.j_in if probe.mode is DriveMode.CAVITY else 0.0
    out = np.abs(-math.sqrt(probe.R1 * j) + math.sqrt(probe.R2 * params.kappa) * a) ** 2
    return out


def emission_flux(params: SystemParams, probe: ProbeConfig, det: DetuningPair):
    """Photon flux leaving through the input mirror, ``2 kappa_T |a|**2``."""
    a = steady_field(params, probe, det).a
    return 2.0 * probe.kappa_in(params) * np.abs(a) ** 2


def flux_reference(params: SystemParams, probe: ProbeConfig) -> float:
    """Coupling-independent flux scale used to express spectra as dimensionless shapes.

    Cavity drive: the incident flux ``j_in``, so the far-off-resonant value
    is ``R1``.  Atom drive: ``R2 (Omega/2)**2 / gamma``, so the shape is
    ``kappa gamma g^2 / |(kappa - i dc)(gamma - i da) + g^2|**2``.
    """
    if probe.mode is DriveMode.CAVITY:
        return probe.j_in
    return probe.R2 * (0.5 * probe.rabi) ** 2 / params.gamma


def normalized_flux(params: SystemParams, probe: ProbeConfig, det: DetuningPair):
    ref = flux_reference(params, probe)
    if ref == 0:
        raise ValueError("probe strength is zero; normalised flux undefined")
    return reflected_flux(params, probe, det) / ref


def scaled_photon_number(params: SystemParams, probe: ProbeConfig, det: DetuningPair):
    """Intracavity photon number scaled to be independent of the probe strength.

    Cavity drive: ``|a|^2 (kappa/eta)^2``.  Atom drive:
    ``|a|^2 (g^2 + kappa gamma)^2 / (g Omega / 2)^2``, equal to 1 on resonance.
    """
    a = steady_field(params, probe, det).a
    if probe.mode is DriveMode.CAVITY:
        eta = probe.eta(params)
        if eta == 0:
            raise ValueError("eta is zero")
        return np.abs(a) ** 2 * (params.kappa / eta) ** 2
    denom = params.g * 0.5 * probe.rabi
    if denom == 0:
        raise ValueError("g * Omega is zero; atom-drive scaling undefined")
    return np.abs(a) ** 2 * ((params.g**2 + params.kappa * params.gamma) / denom) ** 2
