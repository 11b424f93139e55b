from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gvcspatial.core.errors import DimensionError, NestingError, RankError, UsageError, VarianceError
from gvcspatial.data.frame import RegressionFrame
from gvcspatial.montecarlo.simulate import simulate_panel
from gvcspatial.spatialpanel.base import EstimationOptions, ModelKind, ModelSpec, within
from gvcspatial.spatialpanel.diagnostics import hausman_test, lr_test, wald_test
from gvcspatial.spatialpanel.estimate import fit
from gvcspatial.spatialpanel.fe import fit_fe, fit_re
from gvcspatial.spatialpanel.ml import concentrated_loglik, fit_sar, fit_sdm, fit_sem


def _specs(frame, w, lagged=("x1",)):
    return {
        "FE": ModelSpec(ModelKind.FE, frame),
        "SAR": ModelSpec(ModelKind.SAR, frame, w),
        "SEM": ModelSpec(ModelKind.SEM, frame, w),
        "SDM": ModelSpec(ModelKind.SDM, frame, w, lagged),
    }


class TestModelSpec:
    def test_spatial_models_need_weights(self, sar_frame):
        frame, _ = sar_frame
        with pytest.raises(UsageError, match="weight matrix"):
            ModelSpec(ModelKind.SDM, frame, None, ("x1",))

    def test_lag_rules(self, sar_frame):
        frame, w = sar_frame
        with pytest.raises(UsageError):
            ModelSpec(ModelKind.SAR, frame, w, ("x1",))
        with pytest.raises(UsageError):
            ModelSpec(ModelKind.SDM, frame, w)
        with pytest.raises(UsageError, match="not in the frame"):
            ModelSpec(ModelKind.SDM, frame, w, ("x9",))
        with pytest.raises(UsageError, match="duplicate"):
            ModelSpec(ModelKind.SDM, frame, w, ("x1", "x1"))

    def test_weights_must_follow_frame_order(self, sar_frame):
        frame, w = sar_frame
        shuffled = w.align(tuple(reversed(w.labels)))
        with pytest.raises(UsageError, match="align"):
            ModelSpec(ModelKind.SAR, frame, shuffled)

    def test_kind_from_string(self, sar_frame):
        frame, w = sar_frame
        assert ModelSpec("sar", frame, w).kind is ModelKind.SAR
        with pytest.raises(UsageError, match="Unknown model"):
            ModelKind.parse("GMM")


class TestFixedEffects:
    def test_matches_dummy_variable_regression(self, sar_frame):
        frame, _ = sar_frame
        result = fit_fe(ModelSpec(ModelKind.FE, frame))
        dummies = np.tile(np.eye(frame.n), (frame.T_eff, 1))
        Z = np.column_stack([frame.X, dummies])
        coef = np.linalg.lstsq(Z, frame.y, rcond=None)[0]
        assert_allclose(result.beta, coef[: frame.k], atol=1e-10)
        assert_allclose(result.fixed_effects, coef[frame.k:], atol=1e-10)
        assert result.metadata["dof"] == len(frame.y) - frame.n - frame.k
        assert 0.0 <= result.pseudo_r2 <= 1.0

    def test_covariance_uses_within_degrees_of_freedom(self, sar_frame):
        frame, _ = sar_frame
        result = fit_fe(ModelSpec(ModelKind.FE, frame))
        Xw = within(frame.X, frame.n)
        expected = result.sigma2 * np.linalg.inv(Xw.T @ Xw)
        assert_allclose(result.cov, expected, rtol=1e-8)

    def test_country_constants_are_annihilated(self, sar_frame):
        frame, w = sar_frame
        shift = np.tile(np.random.default_rng(3).normal(scale=5.0, size=frame.n), frame.T_eff)
        moved = RegressionFrame(
            y=frame.y + shift,
            X=frame.X,
            regressor_names=frame.regressor_names,
            countries=frame.countries,
            years=frame.years,
        )
        assert_allclose(fit_fe(ModelSpec(ModelKind.FE, moved)).beta, fit_fe(ModelSpec(ModelKind.FE, frame)).beta,
                        atol=1e-10)
        # the spatial fits see identical demeaned data up to rounding in the line search
        for kind, lagged in ((ModelKind.SAR, ()), (ModelKind.SDM, ("x1",))):
            base = fit(ModelSpec(kind, frame, w, lagged))
            other = fit(ModelSpec(kind, moved, w, lagged))
            assert_allclose(other.coef, base.coef, atol=1e-6)

    def test_recovers_slopes_of_a_fixed_effects_panel(self):
        rng = np.random.default_rng(17)
        n, T, beta = 100, 17, np.array([-0.2, 0.5])
        mu = rng.normal(scale=2.0, size=n)
        X = rng.normal(size=(n * T, 2)) + np.tile(mu, T)[:, None]
        y = X @ beta + np.tile(mu, T) + rng.normal(scale=0.1, size=n * T)
        frame = RegressionFrame(y=y, X=X, regressor_names=("ln_CI_lag", "x1"),
                                countries=tuple(f"c{i:03d}" for i in range(n)), years=tuple(range(T)))
        result = fit_fe(ModelSpec(ModelKind.FE, frame))
        assert_allclose(result.beta, beta, atol=0.03)
        assert np.all(np.abs(result.beta - beta) < 4.0 * result.se[:2])
        assert_allclose(result.fixed_effects, mu, atol=0.1)

    def test_time_invariant_regressor(self, sar_frame):
        frame, _ = sar_frame
        constant = np.tile(np.arange(frame.n, dtype=float), frame.T_eff)
        bad = RegressionFrame(
            y=frame.y,
            X=np.column_stack([frame.X, constant]),
            regressor_names=frame.regressor_names + ("fixed",),
            countries=frame.countries,
            years=frame.years,
        )
        with pytest.raises(VarianceError, match="fixed"):
            fit_fe(ModelSpec(ModelKind.FE, bad))

    def test_collinear_regressors(self, sar_frame):
        frame, _ = sar_frame
        bad = RegressionFrame(
            y=frame.y,
            X=np.column_stack([frame.X, 2.0 * frame.X[:, 1]]),
            regressor_names=frame.regressor_names + ("twice",),
            countries=frame.countries,
            years=frame.years,
        )
        with pytest.raises(RankError) as info:
            fit_fe(ModelSpec(ModelKind.FE, bad))
        assert info.value.columns

    def test_too_few_observations(self):
        frame = RegressionFrame(
            y=np.arange(6.0),
            X=np.arange(6.0)[:, None] ** 2,
            regressor_names=("x",),
            countries=("a", "b", "c"),
            years=(1, 2),
        )
        fe = fit_fe(ModelSpec(ModelKind.FE, frame))
        assert fe.metadata["dof"] == 2
        short = RegressionFrame(y=np.arange(3.0), X=np.arange(3.0)[:, None] ** 2,
                                regressor_names=("x",), countries=("a", "b", "c"), years=(1,))
        with pytest.raises(VarianceError):
            fit_fe(ModelSpec(ModelKind.FE, short))


class TestRandomEffects:
    def test_theta_and_hausman(self, sar_frame):
        frame, _ = sar_frame
        fe = fit_fe(ModelSpec(ModelKind.FE, frame))
        re = fit_re(ModelSpec(ModelKind.RE, frame))
        assert 0.0 <= re.metadata["theta"] <= 1.0
        assert "intercept" in re.metadata
        test = hausman_test(fe, re)
        assert test.statistic >= 0.0
        assert test.df == frame.k
        assert 0.0 <= test.p_value <= 1.0

    def test_without_individual_effects_matches_pooled_ols(self):
        rng = np.random.default_rng(5)
        n, T = 40, 6
        X = rng.normal(size=(n * T, 2))
        noise = within(rng.normal(size=n * T), n)
        # every country's residual mean is zero, so the between fit is exact
        y = 0.3 + X @ np.array([0.4, -0.7]) + noise
        frame = RegressionFrame(y=y, X=X, regressor_names=("a", "b"),
                                countries=tuple(f"c{i}" for i in range(n)), years=tuple(range(T)))
        re = fit_re(ModelSpec(ModelKind.RE, frame))
        pooled = np.linalg.lstsq(np.column_stack([np.ones(n * T), X]), y, rcond=None)[0]
        assert re.metadata["variance_clamped"]
        assert re.metadata["theta"] == pytest.approx(0.0, abs=1e-12)
        assert re.metadata["intercept"] == pytest.approx(pooled[0], abs=1e-6)
        assert_allclose(re.beta, pooled[1:], atol=1e-6)

    def test_lies_between_fixed_effects_and_pooled(self):
        rng = np.random.default_rng(6)
        n, T = 60, 10
        a = rng.normal(scale=3.0, size=n)
        x = np.tile(a, T) + rng.normal(size=n * T)
        y = 0.5 * x + np.tile(2.0 * a, T) + rng.normal(scale=0.5, size=n * T)
        frame = RegressionFrame(y=y, X=x[:, None], regressor_names=("x",),
                                countries=tuple(f"c{i}" for i in range(n)), years=tuple(range(T)))
        fe = fit_fe(ModelSpec(ModelKind.FE, frame)).beta[0]
        re = fit_re(ModelSpec(ModelKind.RE, frame)).beta[0]
        pooled = np.linalg.lstsq(np.column_stack([np.ones(n * T), x]), y, rcond=None)[0][1]
        assert fe < re < pooled
        assert fe == pytest.approx(0.5, abs=0.05)

    def test_hausman_argument_order(self, sar_frame):
        frame, _ = sar_frame
        fe = fit_fe(ModelSpec(ModelKind.FE, frame))
        re = fit_re(ModelSpec(ModelKind.RE, frame))
        with pytest.raises(UsageError):
            hausman_test(re, fe)

    def test_needs_more_countries_than_regressors(self):
        frame = RegressionFrame(
            y=np.random.default_rng(0).normal(size=9),
            X=np.random.default_rng(1).normal(size=(9, 2)),
            regressor_names=("a", "b"),
            countries=("c1", "c2", "c3"),
            years=(1, 2, 3),
        )
        with pytest.raises(DimensionError):
            fit_re(ModelSpec(ModelKind.RE, frame))


class TestSpatialModels:
    def test_sar_recovers_parameters(self, sar_frame, sar_config):
        frame, w = sar_frame
        result = fit_sar(ModelSpec(ModelKind.SAR, frame, w))
        assert result.rho == pytest.approx(sar_config.rho, abs=0.15)
        assert_allclose(result.beta, sar_config.beta, atol=0.05)
        assert result.param_names == ("ln_CI_lag", "x1", "rho")
        lo, hi = w.admissible_interval
        assert lo < result.rho < hi
        assert result.cov.shape == (3, 3)
        assert result.se_sigma2 > 0

    def test_sem_recovers_lambda(self, sem_config):
        sim = simulate_panel(sem_config)
        result = fit_sem(ModelSpec(ModelKind.SEM, sim.frame, sim.weights))
        assert result.lambda_ == pytest.approx(0.5, abs=0.2)
        assert result.rho is None
        assert result.spatial_name == "lambda"
        assert_allclose(result.beta, sem_config.beta, atol=0.05)

    def test_sdm_recovers_gamma(self, sdm_config):
        sim = simulate_panel(sdm_config)
        result = fit_sdm(ModelSpec(ModelKind.SDM, sim.frame, sim.weights, ("x1",)))
        assert result.gamma_names == ("W*x1",)
        assert result.coefficient("W*x1") == pytest.approx(0.25, abs=0.1)
        assert result.rho == pytest.approx(0.4, abs=0.2)

    def test_sar_at_zero_equals_fixed_effects(self, sar_frame):
        frame, w = sar_frame
        fe = fit_fe(ModelSpec(ModelKind.FE, frame))
        value = concentrated_loglik(ModelSpec(ModelKind.SAR, frame, w), 0.0)
        assert value == pytest.approx(fe.loglik, abs=1e-6)
        with pytest.raises(UsageError):
            concentrated_loglik(ModelSpec(ModelKind.FE, frame), 0.0)
        with pytest.raises(UsageError):
            concentrated_loglik(ModelSpec(ModelKind.SAR, frame, w), 5.0)

    def test_estimate_maximises_profile(self, sar_frame):
        frame, w = sar_frame
        spec = ModelSpec(ModelKind.SAR, frame, w)
        result = fit(spec)
        for delta in (-0.05, -0.01, 0.01, 0.05):
            assert concentrated_loglik(spec, result.rho + delta) <= result.loglik + 1e-9

    def test_nesting(self, sar_frame):
        frame, w = sar_frame
        specs = _specs(frame, w, lagged=frame.regressor_names)
        fits = {kind: fit(spec) for kind, spec in specs.items()}
        assert fits["SDM"].loglik >= fits["SAR"].loglik - 1e-6
        assert fits["SDM"].loglik >= fits["SEM"].loglik - 1e-6
        for restricted in ("SAR", "SEM"):
            test = lr_test(fits[restricted], fits["SDM"])
            assert test.statistic >= 0.0
            assert test.df == frame.k
        with pytest.raises(UsageError, match="swap"):
            lr_test(fits["SDM"], fits["SAR"])

    def test_lr_needs_same_frame(self, sar_frame, sdm_config):
        frame, w = sar_frame
        other = simulate_panel(sdm_config)
        a = fit_sar(ModelSpec(ModelKind.SAR, frame, w))
        b = fit_sdm(ModelSpec(ModelKind.SDM, other.frame, other.weights, ("x1",)))
        with pytest.raises(UsageError, match="same frame"):
            lr_test(a, b)

    def test_wald_counts_slopes(self, sar_frame):
        frame, w = sar_frame
        result = fit_sdm(ModelSpec(ModelKind.SDM, frame, w, ("x1",)))
        test = wald_test(result)
        assert test.df == frame.k + 1
        assert test.p_value < 0.01
        assert test.name == "wald"

    def test_numerical_hessian_close_to_information(self, sar_frame):
        frame, w = sar_frame
        spec = ModelSpec(ModelKind.SAR, frame, w)
        analytic = fit(spec)
        numerical = fit(spec, EstimationOptions(numerical_hessian=True))
        assert numerical.rho == pytest.approx(analytic.rho, abs=1e-6)
        assert_allclose(numerical.se, analytic.se, rtol=0.1)

    def test_lee_yu_scales_sigma2(self, sar_frame):
        frame, w = sar_frame
        spec = ModelSpec(ModelKind.SAR, frame, w)
        plain = fit(spec)
        corrected = fit(spec, EstimationOptions(lee_yu=True))
        T = frame.T_eff
        assert corrected.sigma2 == pytest.approx(plain.sigma2 * T / (T - 1))
        assert corrected.rho == pytest.approx(plain.rho)

    def test_fit_result_serialises(self, sar_frame):
        frame, w = sar_frame
        result = fit(ModelSpec(ModelKind.SAR, frame, w))
        record = result.to_dict()
        assert record["kind"] == "SAR"
        assert [row["name"] for row in record["coefficients"]] == list(result.param_names)
        assert all(row["tier"] in ("a", "b", "c", "") for row in record["coefficients"])

    def test_residuals_are_demeaned(self, sar_frame):
        frame, w = sar_frame
        result = fit(ModelSpec(ModelKind.SAR, frame, w))
        # residuals are the demeaned innovations, so they average to zero per country
        assert_allclose(within(result.residuals, frame.n), result.residuals, atol=1e-10)

    def test_sem_against_partially_lagged_sdm(self, sar_frame):
        frame, w = sar_frame
        sem = fit_sem(ModelSpec(ModelKind.SEM, frame, w))
        sdm = fit_sdm(ModelSpec(ModelKind.SDM, frame, w, ("x1",)))
        test = lr_test(sem, sdm)
        assert test.name == "lr_sem_vs_sdm"
        assert test.df == 1
        assert test.statistic >= 0.0
        assert "ln_CI_lag" in test.note
        assert test.to_dict()["note"] == test.note
        sar_test = lr_test(fit_sar(ModelSpec(ModelKind.SAR, frame, w)), sdm)
        assert sar_test.df == 1
        assert sar_test.note is None

    @pytest.mark.parametrize("seed", [31, 32, 33, 34, 35])
    def test_fully_lagged_sdm_nests_sem(self, sem_config, seed):
        sim = simulate_panel(sem_config.model_copy(update={"seed": seed}))
        frame, w = sim.frame, sim.weights
        sem = fit_sem(ModelSpec(ModelKind.SEM, frame, w))
        sdm = fit_sdm(ModelSpec(ModelKind.SDM, frame, w, frame.regressor_names))
        assert sdm.loglik >= sem.loglik - 1e-6
        test = lr_test(sem, sdm)
        assert test.df == len(frame.regressor_names)
        assert test.note is None
        with pytest.raises(NestingError, match="below"):
            lr_test(replace(sem, loglik=sdm.loglik + 1.0), sdm)
