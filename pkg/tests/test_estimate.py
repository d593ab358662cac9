import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgequery import estimate, kernels
from edgequery.estimate import EstimatorConfig, LatencyEstimator, LatencyWindow, LognormalFit, UnfitError

pos = st.floats(1e-3, 1e3, allow_nan=False)


def test_update_fast_examples():
    assert estimate.update_fast(0.5, 0.5) == 0.5
    assert estimate.update_fast(1, 3) == pytest.approx(1.75, abs=1e-15)
    assert estimate.update_fast(0.1, 10) < 5.05


@given(pos, pos)
def test_update_fast_between_and_damped(a, b):
    r = estimate.update_fast(a, b)
    lo, hi = min(a, b), max(a, b)
    assert lo * (1 - 1e-12) <= r <= hi * (1 + 1e-12)
    if b > a:
        assert r <= (a + b) / 2 * (1 + 1e-12)
    elif b < a:
        assert r >= (a + b) / 2 * (1 - 1e-12)


@given(pos, pos)
def test_update_fast_matches_exact_weights(a, b):
    fa, fb = Fraction(a), Fraction(b)
    s2 = (fa + fb) ** 2
    exact = (fa * fa + fb * fb) / s2 * fa + 2 * fa * fb / s2 * fb
    assert estimate.update_fast(a, b) == pytest.approx(float(exact), rel=4e-16)


def test_update_fast_fixed_point_is_exact():
    for t in np.exp(np.random.default_rng(0).uniform(-10, 10, 2000)).tolist():
        assert estimate.update_fast(t, t) == t


def test_update_fast_rejects_nonpositive():
    with pytest.raises(ValueError):
        estimate.update_fast(0, 1)


def test_predict_examples():
    fit = LognormalFit(2.0, 0.0, 0.5)
    assert estimate.predict(fit, EstimatorConfig(blend_weight=0.5)) == pytest.approx(
        0.5 * (2 + math.exp(0.125)) + 0.5 * 3, rel=1e-14)
    assert estimate.predict(fit, EstimatorConfig(blend_weight=1.0)) == fit.mean
    assert estimate.predict(fit, EstimatorConfig(blend_weight=0.0)) == fit.median
    tiny = LognormalFit(1.0, 0.3, 1e-9)
    for w in (0.0, 0.3, 1.0):
        assert estimate.predict(tiny, EstimatorConfig(blend_weight=w)) == pytest.approx(1 + math.exp(0.3), rel=1e-12)


def test_predict_monotone():
    cfg = EstimatorConfig()
    base = estimate.predict(LognormalFit(1.0, 0.0, 0.5), cfg)
    assert estimate.predict(LognormalFit(1.1, 0.0, 0.5), cfg) > base
    assert estimate.predict(LognormalFit(1.0, 0.1, 0.5), cfg) > base


def gamma_equation_ref(x, gamma):
    """Location equation in its raw (uncentred) form, straight from the score."""
    d = [xi - gamma for xi in x]
    y = [math.log(v) for v in d]
    n = len(x)
    s_inv = sum(1 / v for v in d)
    s_y = sum(y)
    s_yy = sum(v * v for v in y)
    s_y_inv = sum(a / b for a, b in zip(y, d))
    return s_inv * (s_y - s_yy + s_y * s_y / n) - n * s_y_inv


def test_gamma_score_sign_matches_raw_equation(backend):
    rng = np.random.default_rng(8)
    x = 2.0 + rng.lognormal(0.0, 0.5, 200)
    grid = np.linspace(0, x.min() * 0.999, 25)
    got = kernels.gamma_score(x, grid)
    xs = x.tolist()
    for g, gv in zip(grid, got):
        ref = gamma_equation_ref(xs, g)
        assert gv * len(x) ** 2 == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_fit_recovers_known_distribution(backend):
    x = 2.0 + np.random.default_rng(0).lognormal(0.0, 0.5, 10_000)
    fit = estimate.fit_lognormal3(x)
    assert abs(fit.gamma - 2.0) <= 0.2 and abs(fit.mu) <= 0.1 and abs(fit.sigma - 0.5) <= 0.05
    d_mu, d_sigma, _ = estimate.score_equations(x, fit.gamma, fit.mu, fit.sigma)
    assert abs(d_mu) < 1e-6 and abs(d_sigma) < 1e-6


def test_fit_beats_two_parameter_fallback():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(0.1, 3) + rng.lognormal(rng.normal(), rng.uniform(0.2, 1), 100)
        fit = estimate.fit_lognormal3(x)
        y = np.log(x)
        ll0 = estimate.log_likelihood(x, 0.0, y.mean(), y.std())
        assert estimate.log_likelihood(x, fit.gamma, fit.mu, fit.sigma) >= ll0 - 1e-9


def test_fit_shift_equivariance():
    x = 1.0 + np.random.default_rng(2).lognormal(-0.5, 0.4, 2000)
    a = estimate.fit_lognormal3(x)
    b = estimate.fit_lognormal3(x + 0.5)
    assert a.three_param and b.three_param
    assert b.gamma == pytest.approx(a.gamma + 0.5, abs=1e-6)
    assert b.mu == pytest.approx(a.mu, abs=1e-6)
    assert b.sigma == pytest.approx(a.sigma, abs=1e-6)


def test_fit_rejects_degenerate():
    with pytest.raises(UnfitError):
        estimate.fit_lognormal3([1.0] * 3)
    with pytest.raises(UnfitError):
        estimate.fit_lognormal3([2.0] * 20)
    with pytest.raises(UnfitError):
        estimate.fit_lognormal3([1.0, -1.0] * 10)


def test_window_is_bounded():
    w = LatencyWindow(3, [1, 2, 3, 4])
    assert w.values().tolist() == [2, 3, 4] and len(w) == 3
    with pytest.raises(ValueError):
        w.push(0.0)


def test_estimator_refits_on_schedule():
    cfg = EstimatorConfig(window_capacity=50, refit_interval=20, initial_t=0.1)
    est = LatencyEstimator(cfg)
    rng = np.random.default_rng(3)
    samples = 0.2 + rng.lognormal(-2, 0.3, 60)
    t = cfg.initial_t
    for i, s in enumerate(samples, 1):
        t = estimate.update_fast(t, s)
        if i % 20 == 0:
            fit = estimate.fit_lognormal3(samples[max(0, i - 50):i])
            t = estimate.update_fast(t, estimate.predict(fit, cfg))
        assert est.observe(s) == pytest.approx(t, rel=1e-12)
    assert est.last_fit is not None


@pytest.mark.parametrize("kw", [{"window_capacity": 2}, {"blend_weight": 1.5}, {"refit_interval": 0}, {"initial_t": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EstimatorConfig(**kw)
