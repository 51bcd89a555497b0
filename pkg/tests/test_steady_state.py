import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ditcavity.model import MHZ, SystemParams, damped_eigenvalues
from ditcavity.steady_state import (
    DetuningPair,
    DriveMode,
    ProbeConfig,
    WeakExcitationWarning,
    atom_drive_denominator,
    effective_drive,
    emission_flux,
    field_atom_drive,
    field_cavity_drive,
    normalized_flux,
    reflected_flux,
    scaled_photon_number,
    steady_field,
    steady_state_linear,
)

KAPPA, GAMMA = 3000 * MHZ, 3 * MHZ
DEFAULT = SystemParams.from_mhz(95, 3000, 3)
ORIGIN = DetuningPair(0.0, 0.0)


def with_C(C):
    return SystemParams.from_cooperativity(C, KAPPA, GAMMA)


@st.composite
def configs(draw):
    kappa = draw(st.floats(1e6, 1e10))
    gamma = kappa / draw(st.floats(1.01, 1e4))
    g = kappa * draw(st.floats(0, 3))
    det = draw(st.floats(-3, 3)) * kappa
    p = SystemParams(g, kappa, gamma, det, 0.0)
    dc = draw(st.floats(-5, 5)) * kappa
    da = draw(st.floats(-50, 50)) * gamma
    return p, DetuningPair(dc, da)


class TestProbeConfig:
    def test_defaults(self):
        probe = ProbeConfig.cavity(4.0)
        assert probe.kappa_in(DEFAULT) == KAPPA / 2
        assert probe.eta(DEFAULT) == pytest.approx(math.sqrt(KAPPA * 4.0))
        assert ProbeConfig.atom(1.0).eta(DEFAULT) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ProbeConfig.cavity(1.0, R1=1.5)
        with pytest.raises(ValueError):
            ProbeConfig.cavity(1.0, R2=-0.1)
        with pytest.raises(ValueError):
            ProbeConfig.cavity(-1.0)
        with pytest.raises(ValueError):
            ProbeConfig.cavity(1.0, kappa_T=2 * KAPPA).kappa_in(DEFAULT)
        with pytest.raises(ValueError):
            DriveMode.parse("laser")

    def test_mode_parsing(self):
        assert DriveMode.parse("Atom") is DriveMode.ATOM
        assert ProbeConfig(mode="cavity").mode is DriveMode.CAVITY


class TestCavityDrive:
    def test_resonant_dip_floor(self):
        assert scaled_photon_number(with_C(1.0), ProbeConfig.cavity(1.0), ORIGIN) == pytest.approx(0.25, rel=1e-12)

    def test_empty_cavity_buildup(self):
        p = DEFAULT.with_(g=0.0)
        probe = ProbeConfig.cavity(1.0)
        field = field_cavity_drive(p, probe, DetuningPair(0.0, 1e7))
        assert field.a == pytest.approx(probe.eta(p) / KAPPA, rel=1e-14)
        assert scaled_photon_number(p, probe, ORIGIN) == pytest.approx(1.0, rel=1e-14)

    def test_on_hyperbola_far_from_atom(self):
        da = 100 * GAMMA
        det = DetuningPair(DEFAULT.g**2 / da, da)
        n = scaled_photon_number(DEFAULT, ProbeConfig.cavity(1.0), det)
        assert n == pytest.approx(1.0, abs=0.02)

    def test_rejects_vanishing_atomic_response(self):
        with pytest.raises(ZeroDivisionError):
            field_cavity_drive(DEFAULT, ProbeConfig.cavity(1.0), DetuningPair(0.0, -1j * GAMMA))


class TestAtomDrive:
    @pytest.mark.parametrize("C", [0.3, 1.0, 5.0, 13.4])
    def test_resonant_scaled_value(self, C):
        assert scaled_photon_number(with_C(C), ProbeConfig.atom(1.0), ORIGIN) == pytest.approx(1.0, rel=1e-12)

    def test_no_coupling(self):
        p = DEFAULT.with_(g=0.0)
        dc, da = np.meshgrid(np.linspace(-1, 1, 5) * KAPPA, np.linspace(-9, 9, 7) * GAMMA)
        assert np.all(field_atom_drive(p, ProbeConfig.atom(1e6), DetuningPair(dc, da)).a == 0)

    def test_zero_rabi_gives_zero_field(self):
        field = field_atom_drive(DEFAULT, ProbeConfig.atom(0.0), ORIGIN)
        assert field.a == 0 and field.sigma == 0

    def test_butterfly_maxima(self):
        p = with_C(5.0)
        delta = np.linspace(-4, 4, 80001)
        det = DetuningPair(delta * KAPPA, delta * GAMMA)
        power = np.abs(field_atom_drive(p, ProbeConfig.atom(1.0), det).a) ** 2
        pos = delta[delta > 0][np.argmax(power[delta > 0])]
        neg = delta[delta < 0][np.argmax(power[delta < 0])]
        assert pos == pytest.approx(2.0, abs=1e-3)
        assert neg == pytest.approx(-2.0, abs=1e-3)


class TestCrossChecks:
    @settings(max_examples=200)
    @given(configs(), st.sampled_from(list(DriveMode)))
    def test_closed_form_matches_linear_solve(self, cfg, mode):
        p, det = cfg
        probe = ProbeConfig.cavity(1.0) if mode is DriveMode.CAVITY else ProbeConfig.atom(1.0)
        a = steady_field(p, probe, det)
        b = steady_state_linear(p, probe, det)
        for x, y in ((a.a, b.a), (a.sigma, b.sigma)):
            assert abs(x - y) <= 1e-10 * max(abs(y), 1e-300)

    def test_effective_drive_identity(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            kappa = 10 ** rng.uniform(7, 10)
            gamma = kappa / 10 ** rng.uniform(0.1, 3.5)
            p = SystemParams(kappa * rng.uniform(0, 2), kappa, gamma, rng.normal() * kappa, 0.0)
            det = DetuningPair(rng.normal() * kappa, rng.normal() * 10 * gamma)
            probe = ProbeConfig.atom(gamma * rng.uniform(1e-3, 0.1))
            via_eta = field_cavity_drive(p, probe, det, eta=effective_drive(p, probe, det)).a
            direct = field_atom_drive(p, probe, det).a
            worst = max(worst, abs(via_eta - direct) / abs(direct))
        assert worst < 1e-12

    def test_effective_drive_on_resonance(self):
        probe = ProbeConfig.atom(2.0)
        eta = effective_drive(DEFAULT, probe, DetuningPair(0.0, 0.0))
        assert eta.imag == 0 and eta.real == pytest.approx(-DEFAULT.g / GAMMA)

    def test_effective_drive_far_detuned(self):
        probe = ProbeConfig.atom(1.0)
        near = abs(effective_drive(DEFAULT, probe, DetuningPair(0.0, 1e3 * GAMMA)))
        far = abs(effective_drive(DEFAULT, probe, DetuningPair(0.0, 1e9 * GAMMA)))
        assert far < 2e-6 * near

    def test_effective_drive_requires_atom_mode(self):
        with pytest.raises(ValueError):
            effective_drive(DEFAULT, ProbeConfig.cavity(1.0), ORIGIN)

    @pytest.mark.parametrize("g_mhz", [95, 1000, 2500])
    def test_poles_at_eigenvalues(self, g_mhz):
        p = SystemParams.from_mhz(g_mhz, 3000, 3, omega_c=20)
        for lam in damped_eigenvalues(p).eigenvalues:
            det = DetuningPair(lam - p.omega_c, lam - p.omega_a)
            assert abs(atom_drive_denominator(p, det)) < 1e-9 * KAPPA**2


class TestFlux:
    def test_impedance_matched_empty_cavity(self):
        probe = ProbeConfig.cavity(1.0)
        assert reflected_flux(DEFAULT.with_(g=0.0), probe, ORIGIN) < 1e-10

    @pytest.mark.parametrize("C", [0.5, 1.0, 4.0])
    def test_loaded_resonant_reflection(self, C):
        probe = ProbeConfig.cavity(1.0)
        assert reflected_flux(with_C(C), probe, ORIGIN) == pytest.approx((C / (1 + C)) ** 2, rel=1e-10)

    def test_far_detuned_full_reflection(self):
        for R1 in (1.0, 0.8):
            probe = ProbeConfig.cavity(3.0, R1=R1)
            j = reflected_flux(DEFAULT, probe, DetuningPair(1e6 * KAPPA, 1e6 * KAPPA))
            assert j == pytest.approx(R1 * 3.0, rel=1e-5)

    def test_normalised_reflection_tends_to_R1(self):
        probe = ProbeConfig.cavity(1e4, R1=0.9)
        assert normalized_flux(DEFAULT, probe, DetuningPair(1e7 * KAPPA, 0.0)) == pytest.approx(0.9, rel=1e-6)

    def test_emission_flux(self):
        probe = ProbeConfig.atom(1e5)
        a = field_atom_drive(DEFAULT, probe, ORIGIN).a
        assert emission_flux(DEFAULT, probe, ORIGIN) == pytest.approx(KAPPA * abs(a) ** 2)

    @settings(max_examples=200)
    @given(configs(), st.floats(0, 1), st.floats(0, 1))
    def test_flux_finite_nonnegative(self, cfg, R1, R2):
        p, det = cfg
        probe = ProbeConfig.cavity(1.0, R1=R1, R2=R2)
        j = reflected_flux(p, probe, det)
        assert math.isfinite(j) and j >= 0


class TestInvariants:
    @pytest.mark.parametrize("mode", list(DriveMode))
    def test_probe_strength_invariance(self, mode):
        dc, da = np.meshgrid(np.linspace(-1.5, 1.5, 9) * KAPPA, np.linspace(-15, 15, 11) * GAMMA)
        det = DetuningPair(dc, da)
        if mode is DriveMode.CAVITY:
            low, high = ProbeConfig.cavity(1.0), ProbeConfig.cavity(100.0)
        else:
            low, high = ProbeConfig.atom(1.0), ProbeConfig.atom(10.0)
        a = scaled_photon_number(DEFAULT, low, det)
        b = scaled_photon_number(DEFAULT, high, det)
        np.testing.assert_allclose(a, b, rtol=1e-14)

    @pytest.mark.parametrize("mode", list(DriveMode))
    def test_sign_flip_symmetry(self, mode):
        probe = ProbeConfig.cavity(1.0) if mode is DriveMode.CAVITY else ProbeConfig.atom(1.0)
        dc, da = np.meshgrid(np.linspace(-1.5, 1.5, 13) * KAPPA, np.linspace(-15, 15, 17) * GAMMA)
        plus = np.abs(steady_field(DEFAULT, probe, DetuningPair(dc, da)).a)
        minus = np.abs(steady_field(DEFAULT, probe, DetuningPair(-dc, -da)).a)
        np.testing.assert_allclose(plus, minus, rtol=1e-13)

    def test_weak_excitation_warning_threshold(self):
        p = DEFAULT
        probe_for = lambda target: ProbeConfig.atom(2 * GAMMA * math.sqrt(target))  # noqa: E731
        det = DetuningPair(1e9 * KAPPA, 0.0)  # cavity far off: sigma ~ i Omega / (2 gamma)
        with warnings.catch_warnings():
            warnings.simplefilter("error", WeakExcitationWarning)
            field_atom_drive(p, probe_for(0.099), det)
        with pytest.warns(WeakExcitationWarning):
            field_atom_drive(p, probe_for(0.101), det)
