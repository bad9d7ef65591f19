"""Gradient-model correctness: hand-derived values, finite-difference
oracles, and the pointwise regularity inequalities each model declares."""

import numpy as np
import pytest

from sgldlab import (
    GaussianLocationModel,
    LogisticDataset,
    LogisticPosteriorModel,
    MiniBatch,
    MixturePriorModel,
    make_model,
)
from sgldlab.models import (
    inv_one_plus_exp,
    linear_mse_stoch_grad,
    logreg_full_grad,
    logreg_potential,
    logreg_stoch_grad,
    sigmoid,
    vi_objective,
    vi_stoch_grad,
)

A_HAT = np.array([3.0, -3.0])


def central_gradient(f, x, h=1e-5):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


class TestStableLogistic:
    def test_extreme_arguments_stay_finite(self):
        # naive exp(t) overflows beyond ~709; the guarded forms never do
        for t in (-1e6, -750.0, -1.0, 0.0, 1.0, 750.0, 1e6):
            assert np.isfinite(sigmoid(t))
            assert np.isfinite(inv_one_plus_exp(t))

    def test_complement_identity(self):
        t = np.linspace(-40, 40, 401)
        np.testing.assert_allclose(sigmoid(t) + inv_one_plus_exp(t), 1.0, atol=1e-15)

    def test_matches_naive_in_safe_range(self):
        t = np.linspace(-30, 30, 301)
        np.testing.assert_allclose(sigmoid(t), 1.0 / (1.0 + np.exp(-t)), rtol=1e-14)


class TestLogisticGradients:
    def test_single_point_hand_value(self):
        # z=(1,0), y=1, n=K=1, theta=0, prior terms cancel, likelihood
        # contributes z*(1/2 - 1) = -z/2
        batch = MiniBatch(np.array([[1.0, 0.0]]), np.array([1.0]), np.array([0]))
        g = logreg_stoch_grad(np.zeros(2), batch, A_HAT, n=1, K=1, beta=1.0)
        np.testing.assert_allclose(g, [-0.5, 0.0], atol=1e-15)

    def test_origin_prior_cancels(self, figure1_dataset):
        # at theta=0 the prior contributes -a + 2a/2 = 0 exactly
        rng = np.random.default_rng(0)
        idx = rng.integers(0, figure1_dataset.n, size=10)
        batch = MiniBatch(figure1_dataset.z[idx], figure1_dataset.y[idx], idx)
        g = logreg_stoch_grad(np.zeros(2), batch, A_HAT, n=figure1_dataset.n, K=10, beta=1.0)
        expect = (figure1_dataset.n / 10) * batch.z.T @ (0.5 - batch.y)
        np.testing.assert_allclose(g, expect, rtol=1e-12)

    def test_full_grad_origin(self, small_dataset):
        g = logreg_full_grad(np.zeros(2), small_dataset, A_HAT, beta=1.0)
        expect = small_dataset.z.T @ (0.5 - small_dataset.y)
        np.testing.assert_allclose(g, expect, rtol=1e-12)

    def test_full_grad_matches_finite_differences(self, small_dataset):
        rng = np.random.default_rng(3)
        for _ in range(10):
            theta = rng.normal(0, 1.5, 2)
            g = logreg_full_grad(theta, small_dataset, A_HAT, beta=2.0)
            fd = central_gradient(
                lambda t: logreg_potential(t, small_dataset, A_HAT, beta=2.0), theta
            )
            assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))

    def test_minibatch_mean_matches_full_grad(self, logreg_model):
        # Monte-Carlo average of the minibatch gradient vs the full gradient
        rng = np.random.default_rng(11)
        n_mc = 100_000
        for _ in range(5):
            theta = rng.normal(0, 2.0, 2)
            draws = logreg_model.sample_data_batch(rng, n_mc)
            vals = logreg_model.stoch_grad_many(theta, draws)
            se = vals.std(axis=0, ddof=1) / np.sqrt(n_mc)
            diff = vals.mean(axis=0) - logreg_model.full_grad(theta)
            assert np.all(np.abs(diff) <= 3.0 * se)

    def test_figure1_configuration_runs_without_overflow(self, logreg_model):
        rng = np.random.default_rng(5)
        for scale in (1.0, 100.0, 1000.0):
            theta = scale * rng.normal(0, 1, 2)
            batch = logreg_model.sample_data(rng)
            assert np.isfinite(logreg_model.stoch_grad(theta, batch)).all()

    def test_dimension_mismatch_rejected(self, small_dataset):
        batch = MiniBatch(small_dataset.z[:3], small_dataset.y[:3], np.arange(3))
        with pytest.raises(ValueError):
            logreg_stoch_grad(np.zeros(3), batch, A_HAT, n=20, K=3, beta=1.0)

    def test_nonconvexity_precondition(self, small_dataset):
        with pytest.raises(ValueError, match="a_hat"):
            LogisticPosteriorModel(small_dataset, [0.5, 0.5], n_batch=5)


class TestVariationalGradient:
    def test_origin_no_data(self):
        empty = LogisticDataset(np.zeros((0, 2)), np.zeros(0))
        g = vi_stoch_grad(np.zeros(2), np.zeros(2), A_HAT, empty)
        np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_origin_with_data(self, small_dataset):
        g = vi_stoch_grad(np.zeros(2), np.zeros(2), A_HAT, small_dataset)
        expect = 0.375 * small_dataset.z.T @ (1.0 - 2.0 * small_dataset.y)
        np.testing.assert_allclose(g, expect, rtol=1e-12)

    def test_matches_finite_differences(self, small_dataset):
        rng = np.random.default_rng(4)
        for _ in range(10):
            theta = rng.normal(0, 1.5, 2)
            u = rng.normal(0, 1.5, 2)
            g = vi_stoch_grad(theta, u, A_HAT, small_dataset)
            fd = -central_gradient(
                lambda t: vi_objective(t, u, A_HAT, small_dataset), theta
            )
            assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))

    def test_eta_saturates_instead_of_overflowing(self, vi_model):
        assert np.isfinite(vi_model.eta(np.full(2, 1e3)))


class TestLinearRegressorGradient:
    def test_origin(self):
        y = np.array([1.0, 2.0])
        np.testing.assert_allclose(
            linear_mse_stoch_grad(np.zeros(2), y, 3.0), -2.0 * y * 3.0
        )

    def test_hand_value(self):
        g = linear_mse_stoch_grad(np.array([1.0, 1.0]), np.array([1.0, 0.0]), 1.0)
        np.testing.assert_allclose(g, [0.0, 0.0], atol=1e-15)

    def test_dissipativity_witness(self, linear_model):
        # <theta, H> = 2(<y,t>^2 - z<y,t>) >= <y,t>^2 - z^2 pointwise
        rng = np.random.default_rng(9)
        for _ in range(10_000):
            theta = rng.normal(0, 3, 2)
            x = linear_model.sample_data(rng)
            y, z = x[:-1], x[-1]
            lhs = float(linear_model.stoch_grad(theta, x) @ theta)
            rhs = float(y @ theta) ** 2 - z**2
            assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs), abs(rhs))

    def test_full_gradient_is_linear(self, linear_model):
        theta = np.array([0.3, -1.2])
        np.testing.assert_allclose(linear_model.full_grad(theta), 2.0 * theta)


class TestGaussianCalibration:
    def test_full_grad_identity(self, gaussian_model):
        theta = np.array([0.5, -2.0])
        np.testing.assert_allclose(gaussian_model.full_grad(theta), theta)

    def test_stationary_variance_formula(self):
        m = GaussianLocationModel(dim=1, sigma_data=1.0)
        assert m.stationary_variance(0.1, 1.0) == pytest.approx((0.1 + 2.0) / 1.9)
        # doubling beta at fixed lam halves the temperature contribution
        lam, s2 = 0.07, 1.3
        m2 = GaussianLocationModel(dim=1, sigma_data=np.sqrt(s2))
        v1 = m2.stationary_variance(lam, 1.0)
        v2 = m2.stationary_variance(lam, 2.0)
        assert v1 - v2 == pytest.approx((2.0 - 1.0) / (2.0 - lam))

    def test_pointwise_dissipativity_is_exact(self, gaussian_model):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            theta = rng.normal(0, 5, 2)
            x = gaussian_model.sample_data(rng)
            lhs = float(gaussian_model.stoch_grad(theta, x) @ theta)
            rhs = 0.5 * float(theta @ theta) - 0.5 * float(x @ x)
            assert lhs >= rhs - 1e-9 * max(1.0, abs(lhs))


class TestMixturePrior:
    def test_gradient_at_origin_and_mode(self):
        m = MixturePriorModel([2.0])
        np.testing.assert_allclose(m.full_grad(np.zeros(1)), 0.0, atol=1e-15)
        expect = 2.0 * 2.0 / (1.0 + np.exp(8.0))
        np.testing.assert_allclose(m.full_grad(np.array([2.0])), [expect], rtol=1e-12)

    def test_gradient_matches_potential_finite_differences(self):
        m = MixturePriorModel(A_HAT)
        rng = np.random.default_rng(2)
        for _ in range(5):
            theta = rng.normal(0, 2, 2)
            fd = central_gradient(lambda t: m.potential(t), theta)
            assert np.linalg.norm(m.full_grad(theta) - fd) <= 1e-6

    def test_exact_sampler_symmetry(self, mixture_model):
        rng = np.random.default_rng(21)
        draws = mixture_model.sample_target(rng, 1_000_000, beta=1.0)
        se = draws.std(ddof=1) / np.sqrt(draws.shape[0])
        assert abs(draws.mean()) <= 4.0 * se

    def test_sampler_requires_unit_beta(self, mixture_model):
        with pytest.raises(ValueError):
            mixture_model.sample_target(np.random.default_rng(0), 10, beta=2.0)

    def test_potential_min_on_axis(self):
        m = MixturePriorModel([2.0])
        # the numeric minimum cannot beat a dense scan along the axis
        grid = np.linspace(-8, 8, 20_001)
        dense = min(m.potential(np.array([t])) for t in grid)
        assert m.potential_min() == pytest.approx(dense, abs=1e-6)


class TestDeclaredGrowthBound:
    @pytest.mark.parametrize(
        "fixture", ["logreg_model", "vi_model", "linear_model", "gaussian_model", "mixture_model"]
    )
    def test_growth_bound_pointwise(self, fixture, request):
        # |H(t,x)| <= L1 eta(x)|t| + L2 etabar(x) + H* on random tuples
        model = request.getfixturevalue(fixture)
        c = model.constants
        rng = np.random.default_rng(31)
        for _ in range(2000):
            theta = rng.normal(0, 3, model.dim_theta)
            x = model.sample_data(rng)
            lhs = np.linalg.norm(model.stoch_grad(theta, x))
            rhs = (
                c.L1 * model.eta(x) * np.linalg.norm(theta)
                + c.L2 * model.eta_bar(x)
                + c.H_star
            )
            assert lhs <= rhs + 1e-9 * max(1.0, rhs)


def test_registry_round_trip(small_dataset):
    names = {"gaussian": {"dim": 2}, "linear_mse": {"dim": 3},
             "mixture": {"a_hat": [2.0, 1.0]},
             "logreg": {"dataset": small_dataset, "a_hat": A_HAT, "n_batch": 4},
             "vi": {"dataset": small_dataset, "a_hat": A_HAT}}
    for name, params in names.items():
        assert make_model(name, **params).name == name
    with pytest.raises(ValueError, match="unknown model"):
        make_model("nope")
