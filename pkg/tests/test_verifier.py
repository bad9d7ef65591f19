"""Assumption verification and moment estimation against independent
quadrature and Monte-Carlo oracles."""

import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import chi

from sgldlab import (
    GaussianLocationModel,
    LinearRegressorModel,
    estimate_moments,
    unbiasedness_test,
    verify_assumptions,
)


class TestVerifyAssumptions:
    def test_logreg_declared_constants_hold(self, logreg_model):
        rep = verify_assumptions(logreg_model, trials=2000, seed=1)
        assert rep.all_passed
        # the declared Lipschitz factor dominates the observed ratio
        assert rep.lipschitz_theta.worst_ratio <= logreg_model.constants.L1
        assert rep.lipschitz_x.worst_ratio <= logreg_model.constants.L2

    def test_vi_declared_constants_hold(self, vi_model):
        rep = verify_assumptions(vi_model, region_radius_x=12.0, trials=2000, seed=1)
        assert rep.all_passed

    def test_gaussian_dissipativity_margin_nonnegative(self, gaussian_model):
        rep = verify_assumptions(gaussian_model, trials=2000, seed=1)
        assert rep.all_passed
        assert rep.dissipativity.worst_margin >= -1e-12

    def test_report_serializes(self, gaussian_model):
        rep = verify_assumptions(gaussian_model, trials=1000, seed=0)
        obj = json.loads(rep.to_json())
        assert obj["model"] == "gaussian"
        assert obj["lipschitz_theta"]["passed"] is True

    def test_trial_floor_enforced(self, gaussian_model):
        with pytest.raises(ValueError):
            verify_assumptions(gaussian_model, trials=10)

    def test_violation_is_caught(self, small_dataset):
        # shrinking the declared factor below the true one must fail the check
        from sgldlab.models import AssumptionConstants

        model = GaussianLocationModel(dim=2)
        model.constants = AssumptionConstants(
            L1=0.5, L2=1.0, a=0.5, b=1.0, H_star=0.0, eta0=1.0
        )
        rep = verify_assumptions(model, trials=1000, seed=0)
        assert not rep.lipschitz_theta.passed
        assert rep.lipschitz_theta.witness is not None


class TestUnbiasedness:
    def test_mixture_deterministic_gradient_exact(self, mixture_model):
        z = unbiasedness_test(mixture_model, [np.array([0.5]), np.array([-3.0])],
                              n_mc=5000, seed=0)
        assert np.all(z == 0.0)

    def test_gaussian_within_four_sigma(self, gaussian_model):
        rng = np.random.default_rng(0)
        thetas = [rng.normal(0, 2, 2) for _ in range(3)]
        z = unbiasedness_test(gaussian_model, thetas, n_mc=100_000, seed=1)
        assert np.max(np.abs(z)) <= 4.0

    def test_requires_exact_gradient(self, vi_model):
        with pytest.raises(ValueError):
            unbiasedness_test(vi_model, [np.zeros(2)], n_mc=1000, seed=0)


class TestEstimateMoments:
    def test_gaussian_constant_eta_is_exact(self, gaussian_model):
        m = estimate_moments(gaussian_model, n_mc=20_000, seed=0)
        assert m.E_eta == 1.0
        assert m.E_eta_sq == 1.0
        assert m.E_one_plus_eta_4 == 16.0
        assert m.std_errors["E_eta"] == 0.0

    def test_linear_model_eta_matches_quadrature(self):
        # |x| follows a chi law with d+1 degrees of freedom; integrate
        # (1 + r)^2 against its density as the independent oracle
        model = LinearRegressorModel(dim=2)
        dist = chi(3)
        oracle = quad(lambda r: (1.0 + r) ** 2 * dist.pdf(r), 0, np.inf)[0]
        m = estimate_moments(model, n_mc=400_000, seed=3)
        assert m.E_eta == pytest.approx(oracle, abs=4 * m.std_errors["E_eta"])
        assert m.E_eta == pytest.approx(oracle, rel=5e-3)

    def test_sigma_hat_matches_quadrature(self):
        # sigma_hat = E[(eta(x)+eta(0))^2 |x|^2] for the centred data law
        model = LinearRegressorModel(dim=2)
        dist = chi(3)
        oracle = quad(
            lambda r: ((1.0 + r) ** 2 + 1.0) ** 2 * r**2 * dist.pdf(r), 0, np.inf
        )[0]
        m = estimate_moments(model, n_mc=400_000, seed=4)
        assert m.sigma_hat == pytest.approx(oracle, abs=4 * m.std_errors["sigma_hat"])

    def test_standard_errors_shrink_like_sqrt_n(self):
        model = LinearRegressorModel(dim=2)
        a = estimate_moments(model, n_mc=50_000, seed=5)
        b = estimate_moments(model, n_mc=100_000, seed=6)
        ratio = b.std_errors["E_eta"] / a.std_errors["E_eta"]
        assert ratio == pytest.approx(1.0 / np.sqrt(2.0), rel=0.2)

    def test_figure1_data_law_moments_finite(self, logreg_model):
        m = estimate_moments(logreg_model, n_mc=20_000, seed=7)
        for field in ("E_eta", "E_eta_sq", "E_one_plus_eta_4", "E_etabar_sq",
                      "E_etabar_3", "E_etabar_4", "sigma_hat", "E_b"):
            assert np.isfinite(getattr(m, field))
            assert getattr(m, field) > 0

    def test_minimum_sample_size(self, gaussian_model):
        with pytest.raises(ValueError):
            estimate_moments(gaussian_model, n_mc=100)
