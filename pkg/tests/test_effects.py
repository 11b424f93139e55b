import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from gvcspatial.core.errors import DomainError, SingularityError, UsageError
from gvcspatial.effects.convergence import convergence_from_effects, convergence_rate
from gvcspatial.effects.impacts import (
    decompose,
    effects_inference,
    effects_matrix,
    multiplier_summaries,
    neumann_multiplier,
    spatial_multiplier,
)
from gvcspatial.montecarlo.simulate import random_weights
from gvcspatial.spatialpanel.base import FitResult, ModelKind, ModelSpec
from gvcspatial.spatialpanel.estimate import fit
from gvcspatial.weights.matrix import WeightMatrix, row_standardize

# totals of the lagged level and the convergence rates they imply, two decimals
TOTALS_AND_RATES = [
    (-0.20, 0.22), (-0.35, 0.43), (-0.22, 0.24), (-0.35, 0.43),
    (-0.20, 0.22), (-0.35, 0.43), (-0.23, 0.26), (-0.36, 0.44),
    (-0.17, 0.18), (-0.35, 0.43), (-0.23, 0.26), (-0.34, 0.41),
    (-0.21, 0.23), (-0.37, 0.46), (-0.25, 0.28), (-0.39, 0.49),
]


def _fit(kind, beta, rho=None, gamma=(), n=12, names=("ln_CI_lag", "x1")):
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    gamma_names = tuple(f"W*{names[i]}" for i in range(len(gamma)))
    m = len(beta) + len(gamma) + (1 if rho is not None else 0)
    return FitResult(
        kind=ModelKind(kind),
        regressor_names=tuple(names),
        beta=beta,
        cov=np.eye(m) * 1e-4,
        sigma2=1.0,
        loglik=0.0,
        residuals=np.zeros(n),
        fitted=np.zeros(n),
        n=n,
        T_eff=1,
        frame_digest="hand",
        gamma_names=gamma_names,
        gamma=gamma,
        rho=rho,
    )


def _neumann_terms(rho, tol=1e-10):
    if rho == 0:
        return 1
    return int(math.ceil(math.log(tol * (1 - abs(rho))) / math.log(abs(rho)))) + 1


@pytest.mark.parametrize("rho", np.linspace(-0.9, 0.9, 20))
def test_multiplier_matches_series(rho):
    w = random_weights(40, degree=4, seed=8)
    exact = spatial_multiplier(rho, w)
    series = neumann_multiplier(rho, w, terms=_neumann_terms(rho))
    assert_allclose(series, exact, atol=1e-8)


def test_series_error_decays_geometrically(ring_weights):
    exact = spatial_multiplier(0.6, ring_weights)
    errors = [np.abs(neumann_multiplier(0.6, ring_weights, terms=m) - exact).max() for m in (5, 10, 20, 40)]
    assert all(a > b for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-7


def test_multiplier_outside_interval(ring_weights):
    with pytest.raises(SingularityError):
        spatial_multiplier(1.0, ring_weights)
    with pytest.raises(UsageError):
        neumann_multiplier(0.5, ring_weights, terms=0)
    assert_array_equal(spatial_multiplier(0.0, ring_weights), np.eye(ring_weights.n))


def test_sdm_effects_on_regular_ring(ring_weights):
    # every row of W sums to one and every diagonal of M is equal
    rho, beta, gamma = 0.5, [-0.3, 0.2], [0.1, -0.05]
    table = decompose(_fit("SDM", beta, rho=rho, gamma=gamma), ring_weights)
    assert_allclose(table.total, (np.array(beta) + np.array(gamma)) / (1 - rho), atol=1e-12)
    assert_allclose(table.direct + table.indirect, table.total, atol=1e-10)
    assert table.indirect_applicable


def test_effects_matrix_summaries(ring_weights):
    result = _fit("SDM", [-0.3, 0.2], rho=0.35, gamma=[0.15])
    table = decompose(result, ring_weights)
    for j, name in enumerate(result.regressor_names):
        S = effects_matrix(result, ring_weights, name)
        n = ring_weights.n
        assert np.trace(S) / n == pytest.approx(table.direct[j], abs=1e-12)
        assert S.sum() / n == pytest.approx(table.total[j], abs=1e-12)
    assert_allclose(effects_matrix(result, ring_weights, 1), effects_matrix(result, ring_weights, "x1"))
    with pytest.raises(UsageError):
        effects_matrix(result, ring_weights, "x9")


def test_fixed_effects_have_no_spillover():
    result = _fit("FE", [-0.25, 0.1])
    table = decompose(result)
    assert_allclose(table.direct, result.beta)
    assert_allclose(table.total, result.beta)
    assert_allclose(table.indirect, 0.0)
    assert not table.indirect_applicable
    assert all(row["indirect"] is None for row in table.to_dict()["effects"])


def test_sar_effects_need_weights():
    with pytest.raises(UsageError, match="weight matrix"):
        decompose(_fit("SAR", [-0.2, 0.1], rho=0.3))


def test_weights_size_must_match_fit(ring_weights):
    with pytest.raises(UsageError, match="countries"):
        decompose(_fit("SAR", [-0.2, 0.1], rho=0.3, n=5), ring_weights)


def test_inference_is_seeded(sar_frame):
    frame, w = sar_frame
    result = fit(ModelSpec(ModelKind.SAR, frame, w))
    a = effects_inference(result, w, draws=200, seed=17)
    b = effects_inference(result, w, draws=200, seed=17)
    assert_array_equal(a.se_total, b.se_total)
    assert_array_equal(a.p_indirect, b.p_indirect)
    assert_allclose(a.total, decompose(result, w).total)
    assert np.all(a.se_direct > 0)
    assert a.draws == 200
    assert a.to_dict()["seed"] == 17

    with pytest.raises(UsageError, match="100 draws"):
        effects_inference(result, w, draws=99)


def test_inference_for_fixed_effects(sar_frame):
    frame, _ = sar_frame
    result = fit(ModelSpec(ModelKind.FE, frame))
    table = effects_inference(result, draws=300, seed=1)
    assert table.to_dict()["effects"][0]["indirect"] is None
    assert_allclose(table.se_direct, table.se_total)
    assert table.rejected == 0


def _with_isolated_country(asymmetric=False):
    rng = np.random.default_rng(4)
    S = rng.uniform(0.5, 2.0, size=(8, 8))
    S = S + S.T
    S[:, 3] = S[3, :] = 0.0
    np.fill_diagonal(S, 0.0)
    labels = [f"C{i}" for i in range(8)]
    if not asymmetric:
        return WeightMatrix.from_proximity(labels, S)
    S[0, 1] += 1.0
    return WeightMatrix(labels=tuple(labels), W=row_standardize(S), S=S, symmetric_base=False)


@pytest.mark.parametrize("asymmetric", [False, True])
def test_draw_summaries_match_the_exact_multiplier(ring_weights, asymmetric):
    for w in (ring_weights, _with_isolated_country(asymmetric)):
        lo, hi = w.admissible_interval
        rhos = np.random.default_rng(9).uniform(0.9 * lo, 0.9 * hi, size=15)
        fast = multiplier_summaries(rhos, w)
        for row, rho in zip(fast, rhos):
            M = spatial_multiplier(rho, w)
            MW = M @ w.W
            exact = [np.trace(M) / w.n, np.trace(MW) / w.n, M.sum() / w.n, MW.sum() / w.n]
            assert_allclose(row, exact, rtol=1e-10, atol=1e-12)


def test_inference_matches_effects_of_each_draw(ring_weights):
    result = _fit("SDM", [-0.3, 0.2], rho=0.35, gamma=[0.15])
    table = effects_inference(result, ring_weights, draws=150, seed=23)
    assert table.rejected == 0

    samples = np.random.default_rng(23).multivariate_normal(result.coef, result.cov, size=150)
    per_draw = [decompose(_fit("SDM", s[:2], rho=s[3], gamma=s[2:3]), ring_weights) for s in samples]
    for which in ("direct", "indirect", "total"):
        values = np.array([getattr(t, which) for t in per_draw])
        assert_allclose(getattr(table, f"se_{which}"), values.std(axis=0, ddof=1), rtol=1e-8)


@pytest.mark.parametrize("B, rate", TOTALS_AND_RATES)
def test_convergence_rates_of_known_totals(B, rate):
    assert convergence_rate(B).rate == pytest.approx(rate, abs=0.01)


def test_direct_plus_indirect_is_total_before_rate():
    # direct -0.21 and indirect -0.14 give a total of -0.35
    report = convergence_rate(-0.21 + -0.14)
    assert report.B == pytest.approx(-0.35)
    assert report.rate == pytest.approx(0.43, abs=0.01)
    assert report.converging


def test_convergence_domain():
    with pytest.raises(DomainError):
        convergence_rate(-1.0)
    with pytest.raises(DomainError):
        convergence_rate(float("nan"))
    assert convergence_rate(0.0).rate == 0.0


def test_divergence_is_reported_not_rejected():
    report = convergence_rate(0.1)
    assert report.rate < 0
    assert not report.converging
    assert report.significant is None


def test_convergence_from_effects_table(sar_frame):
    frame, w = sar_frame
    result = fit(ModelSpec(ModelKind.SAR, frame, w))
    table = effects_inference(result, w, draws=200, seed=3)
    report = convergence_from_effects(table)
    assert report.B == pytest.approx(table.effect("ln_CI_lag"))
    assert report.p_value == table.p_value("ln_CI_lag")
    assert report.to_dict()["significant"] == (report.p_value < 0.05)

    point = convergence_from_effects(decompose(_fit("FE", [-0.2, 0.1])))
    assert point.rate == pytest.approx(-math.log(0.8))
    assert point.p_value is None
