import math

import numpy as np
import pytest

from ditcavity.fitting import (
    CountSurface,
    FitResult,
    expected_counts,
    fit_surface,
    initial_guess,
    model_counts,
    surface_shape,
    synthesize_counts,
)
from ditcavity.leastsq import FitError, SingularFitError, least_squares
from ditcavity.model import MHZ, SystemParams, cooperativity
from ditcavity.spectra import SpectrumSurface, default_grids, lorentzian, scan_2d
from ditcavity.steady_state import DriveMode, ProbeConfig

GAMMA = 3 * MHZ
KAPPA_CAVITY = 2200 * MHZ  # reflection data set linewidth
KAPPA_ATOM = 3200 * MHZ  # emission data set linewidth
EXPOSURE = 1e-3


def make_surface(C, mode=DriveMode.CAVITY, refine=1):
    kappa = KAPPA_CAVITY if mode is DriveMode.CAVITY else KAPPA_ATOM
    p = SystemParams.from_cooperativity(C, kappa, GAMMA)
    probe = ProbeConfig.cavity(1.0) if mode is DriveMode.CAVITY else ProbeConfig.atom(1.0)
    return scan_2d(p, probe, default_grids(p, mode, refine))


def peak_amplitude(surface, peak=200.0):
    return peak / (surface.values.max() * EXPOSURE)


def noiseless(C, mode=DriveMode.CAVITY, refine=1):
    s = make_surface(C, mode, refine)
    return expected_counts(s, peak_amplitude(s), EXPOSURE, 40)


def noisy(C, seed, mode=DriveMode.CAVITY):
    s = make_surface(C, mode)
    return synthesize_counts(s, peak_amplitude(s), EXPOSURE, 40, seed)


class TestLeastSquares:
    def test_linear_one_step(self):
        x = np.linspace(0, 5, 20)
        res = least_squares(
            lambda p: p[0] * x, [1.0], 2.5 * x, damping0=0.0, max_iter=1, jac=lambda p: x[:, None]
        )
        assert res.iterations == 1
        assert res.params[0] == pytest.approx(2.5, rel=1e-12)

    def test_linear_one_step_finite_differences(self):
        # without an analytic Jacobian the step carries the difference-quotient rounding error
        x = np.linspace(0, 5, 20)
        res = least_squares(lambda p: p[0] * x, [1.0], 2.5 * x, damping0=0.0, max_iter=1)
        assert res.params[0] == pytest.approx(2.5, rel=1e-10)

    def test_lorentzian_offset_start(self):
        x = np.linspace(-20, 20, 401)
        truth = np.array([0.2, 3.0, 1.0, 2.5])
        y = lorentzian(x, *truth)
        res = least_squares(lambda p: lorentzian(x, *p), truth * 1.1, y)
        assert res.converged
        np.testing.assert_allclose(res.params, truth, rtol=1e-8)

    def test_rosenbrock(self):
        res = least_squares(
            lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]]), [-1.2, 1.0], np.zeros(2), max_iter=500
        )
        assert res.converged
        np.testing.assert_allclose(res.params, [1.0, 1.0], atol=1e-6)

    def test_weights_and_covariance(self):
        x = np.linspace(0, 1, 50)
        sigma = 0.1
        res = least_squares(lambda p: p[0] + p[1] * x, [0.0, 0.0], 1 + 2 * x, np.full(50, 1 / sigma**2))
        X = np.column_stack([np.ones_like(x), x])
        np.testing.assert_allclose(res.covariance, sigma**2 * np.linalg.inv(X.T @ X), rtol=1e-6)

    def test_lower_bound(self):
        x = np.linspace(0, 1, 10)
        res = least_squares(lambda p: p[0] * x, [1.0], -x, lower=[0.0])
        assert res.params[0] == 0.0

    def test_non_finite_model(self):
        with pytest.raises(FitError) as info:
            least_squares(lambda p: np.full(3, np.nan), [1.0], np.zeros(3))
        assert "params" in info.value.diagnostics

    def test_rank_deficient_start(self):
        with pytest.raises(SingularFitError):
            least_squares(lambda p: np.full(5, p[0] + p[1]), [1.0, 1.0], np.ones(5))

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            least_squares(lambda p: p[0] * np.ones(3), [1.0], np.ones(3), [1.0, 0.0, 1.0])


class TestSynthesis:
    def test_zero_mean(self):
        s = make_surface(1.0)
        data = synthesize_counts(s, 0.0, EXPOSURE, 40, seed=1)
        assert np.all(data.counts == 0)

    def test_poisson_statistics(self):
        p = SystemParams.from_cooperativity(1.0, KAPPA_CAVITY, GAMMA)
        flat = SpectrumSurface(np.arange(100.0), np.arange(100.0), np.ones((100, 100)), DriveMode.CAVITY, p)
        data = synthesize_counts(flat, 200.0 / EXPOSURE, EXPOSURE, 40, seed=5)
        assert data.mean_counts.mean() == pytest.approx(200, rel=1e-3)
        assert data.mean_counts.std() == pytest.approx(math.sqrt(200 / 40), rel=0.05)

    def test_seed_reproducibility(self):
        a, b = noisy(2.0, 11), noisy(2.0, 11)
        assert a.counts.dtype == np.int64
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, noisy(2.0, 12).counts)

    def test_overflow_guard(self):
        s = make_surface(1.0)
        with pytest.raises(OverflowError):
            synthesize_counts(s, 1e300, EXPOSURE, 40)

    def test_count_surface_validation(self):
        dc, da = np.zeros(2), np.zeros(3)
        with pytest.raises(ValueError):
            CountSurface(dc, da, np.full((2, 3), 1.5), 1.0)
        with pytest.raises(ValueError):
            CountSurface(dc, da, -np.ones((2, 3)), 1.0)
        with pytest.raises(ValueError):
            CountSurface(dc, da, np.ones((3, 2)), 1.0)
        with pytest.raises(ValueError):
            CountSurface(dc, da, np.ones((2, 3)), 0.0)
        ok = CountSurface(dc, da, np.full((2, 3), 1.5), 1.0, expected=True)
        assert np.all(ok.variance() == 1.5)
        dim = CountSurface(dc, da, np.full((2, 3), 0.5), 1.0, expected=True)
        assert np.all(dim.variance() == 1.0)


class TestFit:
    @pytest.mark.parametrize("C", [0.4, 1.4, 6.6, 13.4])
    def test_noiseless_reflection(self, C):
        res = fit_surface(noiseless(C))
        assert res.converged
        assert res.C_hat == pytest.approx(C, rel=1e-4)

    @pytest.mark.parametrize("C", [0.3, 1.0, 2.8])
    def test_noiseless_emission(self, C):
        res = fit_surface(noiseless(C, DriveMode.ATOM))
        assert res.converged
        assert res.C_hat == pytest.approx(C, rel=1e-4)

    def test_explicit_start(self):
        data = noiseless(6.6)
        res = fit_surface(data, init={"C": 2.0, "A": initial_guess(data, {"kappa": KAPPA_CAVITY, "gamma": GAMMA, "detuning": 0.0})[1]})
        assert res.C_hat == pytest.approx(6.6, rel=1e-4)
        assert res.diagnostics["init"][0] == 2.0

    def test_amplitude_is_off_resonant_level(self):
        data = noiseless(1.4)
        res = fit_surface(data)
        far = peak_amplitude(make_surface(1.4)) * EXPOSURE * data.probe.j_in
        assert res.amplitude_hat == pytest.approx(far, rel=1e-6)
        np.testing.assert_allclose(model_counts(res, data), data.mean_counts, rtol=1e-8)

    def test_poisson_emission(self):
        hits = sum(abs(fit_surface(noisy(2.8, seed, DriveMode.ATOM)).C_hat / 2.8 - 1) < 0.05 for seed in range(30))
        assert hits >= 27

    def test_seeded_fit_reproducible(self):
        a, b = fit_surface(noisy(6.6, 4)), fit_surface(noisy(6.6, 4))
        assert a.to_dict() == b.to_dict()

    @pytest.mark.parametrize("mode,C", [(DriveMode.CAVITY, 0.4), (DriveMode.CAVITY, 13.4), (DriveMode.ATOM, 0.3), (DriveMode.ATOM, 2.8)])
    def test_identifiability(self, mode, C):
        res = fit_surface(noisy(C, 0, mode))
        cov = np.asarray(res.covariance)
        assert np.all(np.isfinite(cov))
        assert abs(res.correlation()) < 0.99

    @pytest.mark.parametrize("mode", list(DriveMode))
    def test_reparametrisation(self, mode):
        data = noiseless(2.8, mode)
        by_c = fit_surface(data)
        by_g = fit_surface(data, parametrization="g")
        assert by_g.parametrization == "g"
        assert by_g.g_hat**2 / (by_g.kappa * by_g.gamma) == pytest.approx(by_c.C_hat, rel=1e-6)
        with pytest.raises(ValueError):
            fit_surface(data, parametrization="kappa")

    @pytest.mark.parametrize("C", [0.4, 6.6])
    def test_monotone_refinement(self, C):
        # errors at the solver floor (~1e-12) are noise; refinement must not push above it
        coarse = abs(fit_surface(noiseless(C, refine=1)).C_hat / C - 1)
        fine = abs(fit_surface(noiseless(C, refine=2)).C_hat / C - 1)
        assert fine <= max(coarse, 1e-9)

    @staticmethod
    def _uniform(grid, counts=None):
        p = SystemParams.from_cooperativity(0.0, KAPPA_CAVITY, GAMMA)
        if grid == "far":
            # a uniform surface is what an empty cavity gives far from resonance
            dc, da = np.linspace(40, 60, 28) * KAPPA_CAVITY, np.linspace(-15, 15, 28) * GAMMA
        else:
            dc, da = default_grids(p, DriveMode.CAVITY)
        expected = counts is None
        counts = np.full((28, 28), 100.0 * 40) if expected else counts
        return CountSurface(dc, da, counts, EXPOSURE, 40, DriveMode.CAVITY, None, p, ProbeConfig.cavity(1.0), expected)

    def test_uniform_surface_noiseless(self):
        res = fit_surface(self._uniform("far"), init=(1.0, 100.0))
        assert res.converged
        assert res.C_hat == 0.0
        assert res.amplitude_hat == pytest.approx(100.0, rel=1e-3)

    @pytest.mark.parametrize("seed", range(4))
    def test_uniform_surface_poisson(self, seed):
        counts = np.random.default_rng(seed).poisson(np.full((28, 28), 100.0 * 40))
        res = fit_surface(self._uniform("far", counts), init=(1.0, 100.0))
        assert res.converged
        assert res.C_hat <= 3 * math.sqrt(res.covariance[0][0])
        assert res.amplitude_hat == pytest.approx(100.0, rel=0.01)
        assert res.residual_norm == pytest.approx(1.0, abs=0.15)

    def test_uniform_surface_on_resonant_grid(self):
        # near resonance only an arbitrarily strong coupling hides the cavity dip
        res = fit_surface(self._uniform("default"), init=(1.0, 100.0))
        assert res.C_hat > 1e3

    def test_flat_model_is_singular(self):
        s = make_surface(1.0)
        zero = CountSurface(s.delta_c, s.delta_a, np.zeros(s.values.shape, dtype=int), EXPOSURE, 40,
                            DriveMode.CAVITY, 0, s.params, s.probe)
        with pytest.raises(SingularFitError):
            fit_surface(zero, init=(0.0, 0.0))
        with pytest.raises(SingularFitError):
            fit_surface(zero)

    def test_start_on_bound(self):
        data = noiseless(1.4)
        res = fit_surface(data, init=(0.0, initial_guess(data, {"kappa": KAPPA_CAVITY, "gamma": GAMMA, "detuning": 0.0})[1]))
        assert res.C_hat == pytest.approx(1.4, rel=1e-4)

    def test_iteration_cap_reported(self):
        res = fit_surface(noiseless(6.6), init=(0.5, 100.0), max_iter=1)
        assert not res.converged and res.iterations == 1
        assert res.message == "iteration cap reached"

    def test_missing_rates(self):
        data = noiseless(1.0)
        data.params = None
        with pytest.raises(ValueError, match="kappa"):
            fit_surface(data)
        res = fit_surface(data, fixed={"kappa": KAPPA_CAVITY, "gamma": GAMMA})
        assert res.C_hat == pytest.approx(1.0, rel=1e-4)


class TestHelpers:
    def test_initial_guess_reasonable(self):
        data = noiseless(6.6)
        C0, A0 = initial_guess(data, {"kappa": KAPPA_CAVITY, "gamma": GAMMA, "detuning": 0.0})
        assert 0.1 <= C0 < 30
        assert A0 > 0

    def test_shape_normalisation(self):
        data = noiseless(1.0, DriveMode.ATOM)
        fixed = {"kappa": KAPPA_ATOM, "gamma": GAMMA, "detuning": 0.0}
        shape = surface_shape(data, 1.0, fixed)
        p = SystemParams.from_cooperativity(1.0, KAPPA_ATOM, GAMMA)
        assert cooperativity(p) == pytest.approx(1.0)
        assert shape.max() <= 1.0 + 1e-12

    def test_result_dict(self):
        res = fit_surface(noiseless(1.4))
        d = res.to_dict()
        assert FitResult(**d) == res
        assert d["mode"] == "cavity"
