import json
import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from rsfe.math_core import GaussianSpec, UniformSpec, gaussian_free_energy, logistic_sigmoid
from rsfe.oracle import (
    BracketError,
    FiniteDiscrete,
    FiniteMarkovChain,
    QuadratureError,
    QuadratureSettings,
    adaptive_simpson,
    adversarial_best_response,
    expected_update,
    extremal_value_iteration,
    extremizer,
    fixed_point,
    free_energy,
    free_energy_quadrature,
    functional_value,
    kl_divergence,
    linear_solve_values,
    lipschitz_scan,
    lobe_ratio,
    lobe_ratio_closed_form,
    risk_sensitive_value_iteration,
)


def _J_scipy(spec, v, beta):
    sd = spec.sd
    f = lambda x: 2.0 / (1.0 + math.exp(-beta * (x - v))) * (x - v) * stats.norm.pdf(x, spec.mu, sd)
    val, _ = integrate.quad(f, spec.mu - 14 * sd, spec.mu + 14 * sd, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def test_expected_update_example():
    assert expected_update(GaussianSpec(0, 1), 0.0, 4.0) == pytest.approx(0.729477531486120150, abs=1e-9)


@pytest.mark.parametrize("mu, rho, beta, v", [(0, 1, 0, 0.7), (1, 0.5, -3, 2.0), (-1, 4, 2.5, -0.3),
                                              (0, 2, 40, 0.1)])
def test_expected_update_against_scipy(mu, rho, beta, v):
    spec = GaussianSpec(mu, rho)
    assert expected_update(spec, v, beta) == pytest.approx(_J_scipy(spec, v, beta), abs=1e-9)


def test_expected_update_beta_zero_is_mean_gap():
    assert expected_update(GaussianSpec(1.5, 2), 0.5, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert expected_update(UniformSpec(-1, 3), 2.0, 0.0) == pytest.approx(-1.0, abs=1e-9)


def test_expected_update_discrete():
    d = FiniteDiscrete(((-1.0, 0.5), (1.0, 0.5)))
    want = 0.5 * 2 * logistic_sigmoid(-1.0, 2.0) * -1 + 0.5 * 2 * logistic_sigmoid(1.0, 2.0) * 1
    assert expected_update(d, 0.0, 2.0) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("beta", [-4.0, -1.0, 0.0, 1.5, 4.0])
def test_gaussian_fixed_point_is_free_energy(beta):
    spec = GaussianSpec(0.3, 2.0)
    assert fixed_point(spec, beta) == pytest.approx(gaussian_free_energy(spec, beta), abs=1e-8)


@pytest.mark.parametrize("beta, want", [(2.0, 1.2521216262574566), (4.0, 1.6237744639041563)])
def test_uniform_fixed_point_frozen(beta, want):
    spec = UniformSpec(-2.0, 2.0)
    assert fixed_point(spec, beta) == pytest.approx(want, abs=1e-8)
    assert fixed_point(spec, -beta) == pytest.approx(-want, abs=1e-8)


def test_uniform_fixed_point_against_brentq():
    spec = UniformSpec(0.0, 1.0)
    beta = 3.0

    def J(v):
        val, _ = integrate.quad(lambda x: 2 * (x - v) / (1 + math.exp(-beta * (x - v))), 0, 1,
                                epsabs=1e-14, epsrel=1e-13)
        return val

    assert fixed_point(spec, beta) == pytest.approx(optimize.brentq(J, 0, 1, xtol=1e-14), abs=1e-9)


def test_fixed_point_bracket_failure():
    with pytest.raises(BracketError):
        fixed_point(GaussianSpec(0, 1), 1.0, max_expansions=0)


@pytest.mark.parametrize("beta", [-3.0, -0.5, 0.5, 3.0])
def test_free_energy_quadrature_matches_closed_forms(beta):
    g = GaussianSpec(-0.5, 1.5)
    assert free_energy_quadrature(g, beta) == pytest.approx(gaussian_free_energy(g, beta), abs=1e-9)
    u = UniformSpec(-2.0, 1.0)
    assert free_energy_quadrature(u, beta) == pytest.approx(free_energy(u, beta), abs=1e-9)


def test_free_energy_discrete_extremes():
    d = FiniteDiscrete(((-1.0, 0.25), (0.0, 0.5), (2.0, 0.25)))
    assert free_energy(d, 0.0) == pytest.approx(0.25)
    assert free_energy(d, 40.0) == pytest.approx(2.0 + math.log(0.25) / 40, abs=1e-12)
    assert free_energy(d, -40.0) == pytest.approx(-1.0 - math.log(0.25) / 40, abs=1e-12)
    assert math.isfinite(free_energy(d, 1e4))


def test_free_energy_quadrature_truncation_raises():
    with pytest.raises(QuadratureError):
        free_energy_quadrature(GaussianSpec(0, 1e-4), 1.0, QuadratureSettings(half_width_sd=2))


@pytest.mark.parametrize("v, delta, beta", [(0.0, 0.5, 2.0), (1.0, 1.0, -1.0), (-0.5, 2.0, 0.0)])
def test_lobe_ratio(v, delta, beta):
    spec = GaussianSpec(0.2, 1.7)
    assert lobe_ratio(spec, v, delta, beta) == pytest.approx(lobe_ratio_closed_form(spec, v, delta, beta),
                                                             rel=1e-12)


def test_lobe_ratio_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        lobe_ratio(GaussianSpec(0, 1), 0.0, 0.0, 1.0)


def test_kl_against_closed_form():
    p, q = GaussianSpec(1.0, 2.0), GaussianSpec(0.0, 1.0)
    # KL(N(m1, s1^2) || N(m0, s0^2))
    s1, s0 = p.sd, q.sd
    want = math.log(s0 / s1) + (s1 ** 2 + (p.mu - q.mu) ** 2) / (2 * s0 ** 2) - 0.5
    assert kl_divergence(p, q) == pytest.approx(want, abs=1e-9)
    assert kl_divergence(q, q) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        kl_divergence(FiniteDiscrete(((0.0, 1.0),)), q)


def test_functional_value_example():
    ref = GaussianSpec(0.0, 1.0)
    assert extremizer(ref, -2.0) == GaussianSpec(-2.0, 1.0)
    assert functional_value(GaussianSpec(-2.0, 1.0), ref, -2.0) == pytest.approx(-1.0, abs=1e-9)
    for shift in (-0.1, 0.1):
        assert functional_value(GaussianSpec(-2.0 + shift, 1.0), ref, -2.0) == pytest.approx(-0.9975, abs=1e-9)


@pytest.mark.parametrize("beta", [-2.0, 1.5])
def test_extremizer_attains_free_energy(beta):
    ref = GaussianSpec(0.5, 2.0)
    best = functional_value(extremizer(ref, beta), ref, beta)
    assert best == pytest.approx(gaussian_free_energy(ref, beta), abs=1e-9)
    # positive beta: maximum, negative beta: minimum
    for p in (GaussianSpec(1.0, 2.0), GaussianSpec(ref.mu + beta / ref.rho, 3.0), GaussianSpec(0.0, 0.5)):
        other = functional_value(p, ref, beta)
        assert (other <= best + 1e-12) if beta > 0 else (other >= best - 1e-12)


def test_functional_requires_nonzero_beta():
    with pytest.raises(ValueError):
        functional_value(GaussianSpec(0, 1), GaussianSpec(0, 1), 0.0)


def test_best_response_matches_log_ratio():
    p, ref, beta = GaussianSpec(0.4, 3.0), GaussianSpec(-0.2, 1.0), -1.5
    xs = np.linspace(-3, 3, 13)
    want = (stats.norm.logpdf(xs, p.mu, p.sd) - stats.norm.logpdf(xs, ref.mu, ref.sd)) / beta
    np.testing.assert_allclose(adversarial_best_response(p, ref, beta, xs), want, atol=1e-12)
    assert isinstance(adversarial_best_response(p, ref, beta, 0.5), float)
    with pytest.raises(ValueError):
        adversarial_best_response(p, ref, 0.0, 0.5)


def test_small_scan_and_json():
    report = lipschitz_scan(mus=(0.0,), rhos=(1.0,), betas=(-2.0, 2.0), offsets=(0.0, 0.5, 2.0),
                            include_uniform=True)
    assert report.skipped == 4
    assert len(report.records) == 2 * 2 * 2 * 2
    assert not report.violations and not report.failures
    assert report.max_ratio <= 2.0
    data = json.loads(report.to_json())
    assert set(data) == {"max_ratio", "argmax", "n_points", "skipped", "violations", "failures", "records"}
    assert data["argmax"] == report.argmax
    assert {"point", "J", "F", "ratio", "pass", "error"} <= set(data["records"][0])


def test_scan_records_quadrature_failures():
    report = lipschitz_scan(mus=(0.0,), rhos=(1.0,), betas=(1.0,), offsets=(1.0,),
                            settings=QuadratureSettings(abs_tol=1e-300, max_depth=2))
    assert len(report.failures) == 2
    assert report.failures[0].J is None
    assert math.isnan(report.max_ratio)


def test_adaptive_simpson():
    val, err = adaptive_simpson(np.sin, 0.0, math.pi)
    assert val == pytest.approx(2.0, abs=1e-10)
    assert err < 1e-9
    with pytest.raises(ValueError):
        adaptive_simpson(np.sin, 1.0, 1.0)
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: 1.0 / np.sqrt(np.abs(x - 0.3)), 0.0, 1.0, max_depth=5)
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda x: np.where(x > 0.5, np.nan, x), 0.0, 1.0)


def _chain(gamma=0.9):
    P = [[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]]
    return FiniteMarkovChain(np.array(P), np.array([1.0, -1.0, 0.5]), gamma)


def test_beta_zero_matches_linear_solve():
    chain = _chain()
    np.testing.assert_allclose(risk_sensitive_value_iteration(chain, 0.0, tol=1e-13),
                               linear_solve_values(chain), atol=1e-10)


def test_deterministic_chain_is_beta_invariant():
    chain = FiniteMarkovChain(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, -2.0]), 0.8)
    base = risk_sensitive_value_iteration(chain, 0.0, tol=1e-13)
    for beta in (-5.0, 3.0):
        np.testing.assert_allclose(risk_sensitive_value_iteration(chain, beta, tol=1e-13), base, atol=1e-10)


def test_extreme_beta_approaches_min_max():
    chain = _chain(0.5)
    lo = extremal_value_iteration(chain, "min")
    hi = extremal_value_iteration(chain, "max")
    v_lo = risk_sensitive_value_iteration(chain, -40.0)
    v_hi = risk_sensitive_value_iteration(chain, 40.0)
    assert np.all(v_lo >= lo - 1e-9) and np.all(v_hi <= hi + 1e-9)
    # log of the smallest transition probability over beta, compounded by 1/(1-gamma)
    slack = math.log(1 / 0.2) / 40 / (1 - 0.5)
    np.testing.assert_allclose(v_lo, lo, atol=slack)
    np.testing.assert_allclose(v_hi, hi, atol=slack)
    with pytest.raises(ValueError):
        extremal_value_iteration(chain, "mean")


@pytest.mark.parametrize("beta", [-3.0, 0.0, 2.0])
def test_contraction_rate(beta):
    chain = _chain(0.7)
    hist = []
    risk_sensitive_value_iteration(chain, beta, history=hist)
    ratios = np.array(hist[1:]) / np.array(hist[:-1])
    assert np.all(ratios[np.array(hist[:-1]) > 1e-7] <= 0.7 + 1e-9)


def test_values_nondecreasing_in_beta():
    chain = _chain()
    vs = [risk_sensitive_value_iteration(chain, b) for b in (-4.0, -1.0, 0.0, 1.0, 4.0)]
    assert all(np.all(b >= a - 1e-9) for a, b in zip(vs, vs[1:]))


def test_transition_rewards_and_terminal_validation():
    P = np.array([[0.5, 0.5], [0.0, 1.0]])
    R = np.array([[0.0, 1.0], [0.0, 0.0]])
    chain = FiniteMarkovChain(P, R, 0.9, terminal=[False, True])
    assert chain.reward_matrix is R or np.array_equal(chain.reward_matrix, R)
    np.testing.assert_allclose(linear_solve_values(chain), [0.5 / (1 - 0.45), 0.0])
    with pytest.raises(ValueError):
        FiniteMarkovChain(P, np.array([[0.0, 1.0], [0.0, 1.0]]), 0.9, terminal=[False, True])
    with pytest.raises(ValueError):
        FiniteMarkovChain(np.array([[0.5, 0.4], [0.0, 1.0]]), np.zeros(2), 0.9)
    with pytest.raises(ValueError):
        FiniteMarkovChain(P, np.zeros(2), 1.0)
