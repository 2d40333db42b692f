import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from app.design.likelihood import HypothesisPair, log_likelihood_ratio, mean_threshold
from app.design.testdesign import (
    CostModel,
    Decision,
    ThresholdTest,
    compare_costs,
    cost_optimal_test,
    decide,
    error_rates,
    expected_cost,
    implied_cost_ratio,
    neyman_pearson_test,
)
from app.errors import InputError, NotAnalyticallyEvaluableError
from app.models.distributions import Bernoulli, Binomial, Exponential, Gaussian, Poisson, Tabulated

# (c0 exponent, alpha*, beta*) of the Gaussian mean example
TABLE_RATES = [
    (0, 0.1587, 0.1587),
    (1, 0.06681, 0.30854),
    (2, 0.02275, 0.5),
]


def test_cost_validation():
    with pytest.raises(InputError):
        CostModel(0.0, 1.0)
    with pytest.raises(InputError):
        CostModel(1.0, math.inf)
    with pytest.raises(InputError):
        ThresholdTest(0.0, 1.5)


@pytest.mark.parametrize("k, cutoff", [(0, 0.6), (1, 0.9), (2, 1.2), (3, 1.5)])
def test_cost_optimal_threshold(gaussian_pair, k, cutoff):
    test = cost_optimal_test(gaussian_pair, CostModel(math.exp(k), 1.0))
    assert test.llr_threshold == pytest.approx(k, abs=1e-12)
    assert test.boundary_randomization == 1.0
    assert mean_threshold(gaussian_pair, test.llr_threshold) == pytest.approx(cutoff, abs=1e-12)


@pytest.mark.parametrize("k, alpha, beta", TABLE_RATES)
def test_cost_optimal_error_rates(gaussian_pair, k, alpha, beta):
    rates = error_rates(cost_optimal_test(gaussian_pair, CostModel(math.exp(k), 1.0)), gaussian_pair)
    assert rates.alpha == pytest.approx(alpha, abs=5e-5)
    assert rates.beta == pytest.approx(beta, abs=5e-5)


def test_cost_optimal_e_cubed(gaussian_pair):
    rates = error_rates(cost_optimal_test(gaussian_pair, CostModel(math.exp(3), 1.0)), gaussian_pair)
    assert rates.alpha == pytest.approx(stats.norm.sf(2.5), abs=1e-12)
    assert rates.beta == pytest.approx(stats.norm.cdf(0.5), abs=1e-12)


def test_np_size_005(gaussian_pair):
    test = neyman_pearson_test(gaussian_pair, 0.05)
    assert mean_threshold(gaussian_pair, test.llr_threshold) == pytest.approx(0.987, abs=1e-3)
    rates = error_rates(test, gaussian_pair)
    assert rates.alpha == pytest.approx(0.05, abs=1e-12)
    assert rates.beta == pytest.approx(0.3613, abs=1e-4)
    assert implied_cost_ratio(test) == pytest.approx(math.exp(test.llr_threshold))


def test_np_size_half_cuts_at_null_mean(gaussian_pair):
    test = neyman_pearson_test(gaussian_pair, 0.5)
    assert mean_threshold(gaussian_pair, test.llr_threshold) == pytest.approx(0.0, abs=1e-12)


def test_np_poisson_randomization(poisson_pair):
    test = neyman_pearson_test(poisson_pair, 0.5)
    p0 = stats.poisson(1.0)
    assert test.llr_threshold == pytest.approx(math.log(2) - 1, abs=1e-12)
    assert test.boundary_randomization == pytest.approx((0.5 - p0.sf(1)) / p0.pmf(1), abs=1e-12)
    assert test.boundary_randomization == pytest.approx(0.6408, abs=1e-3)
    assert error_rates(test, poisson_pair).alpha == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("size", [0.0, 1.0, -0.2, 2.0, True])
def test_np_size_out_of_range(gaussian_pair, size):
    with pytest.raises(InputError):
        neyman_pearson_test(gaussian_pair, size)


def test_poisson_cost_optimal_rejects_from_two(poisson_pair, unit_cost):
    test = cost_optimal_test(poisson_pair, unit_cost)
    assert decide(test, poisson_pair, [1], seed=0) is Decision.ACCEPT_H0
    assert decide(test, poisson_pair, [2], seed=0) is Decision.REJECT_H0
    rates = error_rates(test, poisson_pair)
    assert rates.alpha == pytest.approx(1 - 2 / math.e, abs=1e-12)
    assert rates.beta == pytest.approx(3 * math.exp(-2), abs=1e-12)


def test_expected_cost_table_rows(gaussian_pair):
    assert expected_cost(cost_optimal_test(gaussian_pair, CostModel(1.0, 1.0)), gaussian_pair,
                         CostModel(1.0, 1.0)) == pytest.approx(0.3174, abs=2e-4)
    c3 = CostModel(math.exp(3), 1.0)
    np_cost = expected_cost(neyman_pearson_test(gaussian_pair, 0.05), gaussian_pair, c3)
    assert np_cost == pytest.approx(1.3640, abs=2e-3)
    assert expected_cost(cost_optimal_test(gaussian_pair, c3), gaussian_pair, c3) == pytest.approx(0.8162, abs=1e-4)


def test_trivial_tests(gaussian_pair, poisson_pair):
    cost = CostModel(2.5, 0.4)
    for pair in (gaussian_pair, poisson_pair):
        assert expected_cost(ThresholdTest.always_accept(), pair, cost) == pytest.approx(cost.c1)
        assert expected_cost(ThresholdTest.always_reject(), pair, cost) == pytest.approx(cost.c0)


def test_decide_on_mean(gaussian_pair, unit_cost):
    test = cost_optimal_test(gaussian_pair, unit_cost)
    assert decide(test, gaussian_pair, [0.7] * 100, seed=1) is Decision.REJECT_H0
    assert decide(test, gaussian_pair, [0.5] * 100, seed=1) is Decision.ACCEPT_H0
    assert decide(test, gaussian_pair, [0.6] * 100, seed=1) is Decision.REJECT_H0
    assert decide(ThresholdTest(0.0, 0.0), gaussian_pair, [0.6] * 100, seed=1) is Decision.ACCEPT_H0


def test_decide_randomized_boundary_is_seeded(poisson_pair):
    test = neyman_pearson_test(poisson_pair, 0.5)
    decisions = [decide(test, poisson_pair, [1], seed=s) for s in range(400)]
    assert decisions == [decide(test, poisson_pair, [1], seed=s) for s in range(400)]
    share = sum(d is Decision.REJECT_H0 for d in decisions) / len(decisions)
    assert abs(share - test.boundary_randomization) < 0.1


def test_not_analytic_pairs():
    pair = HypothesisPair(Gaussian(0.0, 1.0), Exponential(1.0), 3)
    with pytest.raises(NotAnalyticallyEvaluableError):
        error_rates(ThresholdTest(0.0), pair)
    with pytest.raises(NotAnalyticallyEvaluableError):
        neyman_pearson_test(pair, 0.05)


def test_discrete_pairs_without_reduction():
    tab0 = Tabulated((0, 1, 2), (0.5, 0.3, 0.2))
    tab1 = Tabulated((0, 1, 2), (0.2, 0.3, 0.5))
    pair = HypothesisPair(tab0, tab1, 3)
    test = neyman_pearson_test(pair, 0.1)
    assert error_rates(test, pair).alpha == pytest.approx(0.1, abs=1e-12)

    # brute force over all 27 samples
    t = 0.4
    alpha = beta = 0.0
    for a in range(3):
        for b in range(3):
            for c in range(3):
                llr = log_likelihood_ratio(pair, [a, b, c])
                m0 = tab0.masses[a] * tab0.masses[b] * tab0.masses[c]
                m1 = tab1.masses[a] * tab1.masses[b] * tab1.masses[c]
                if llr > t:
                    alpha += m0
                else:
                    beta += m1
    rates = error_rates(ThresholdTest(t), pair)
    assert rates.alpha == pytest.approx(alpha, abs=1e-12)
    assert rates.beta == pytest.approx(beta, abs=1e-12)


def test_exponential_rates():
    pair = HypothesisPair(Exponential(1.0), Exponential(3.0), 4)
    test = neyman_pearson_test(pair, 0.1)
    rates = error_rates(test, pair)
    assert rates.alpha == pytest.approx(0.1, abs=1e-10)
    # reject when the sum is small
    cutoff = stats.gamma(a=4, scale=1.0).ppf(0.1)
    assert rates.beta == pytest.approx(stats.gamma(a=4, scale=1 / 3).sf(cutoff), abs=1e-10)


def _random_analytic_pair(rng):
    kind = rng.integers(4)
    n = int(rng.integers(1, 6))
    if kind == 0:
        v = float(rng.uniform(0.5, 10))
        m0 = float(rng.normal())
        return HypothesisPair(Gaussian(m0, v), Gaussian(m0 + float(rng.uniform(0.1, 3)), v), n)
    if kind == 1:
        return HypothesisPair(Poisson(float(rng.uniform(0.3, 4))), Poisson(float(rng.uniform(0.3, 4))), n)
    if kind == 2:
        return HypothesisPair(Exponential(float(rng.uniform(0.3, 4))), Exponential(float(rng.uniform(0.3, 4))), n)
    trials = int(rng.integers(1, 6))
    return HypothesisPair(Binomial(trials, float(rng.uniform(0.1, 0.9))),
                          Binomial(trials, float(rng.uniform(0.1, 0.9))), n)


def test_cost_ratio_invariance():
    rng = np.random.default_rng(31)
    for _ in range(200):
        pair = _random_analytic_pair(rng)
        cost = CostModel(float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        k = float(rng.uniform(0.01, 100))
        base = cost_optimal_test(pair, cost)
        scaled = cost_optimal_test(pair, CostModel(k * cost.c0, k * cost.c1))
        assert scaled.llr_threshold == pytest.approx(base.llr_threshold, abs=1e-12)
        xs = list(pair.p0.draw(rng, pair.sample_size))
        assert decide(base, pair, xs, seed=0) is decide(scaled, pair, xs, seed=0)


def test_cost_optimal_dominates_and_bounds():
    rng = np.random.default_rng(32)
    for _ in range(200):
        pair = _random_analytic_pair(rng)
        cost = CostModel(float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        best = expected_cost(cost_optimal_test(pair, cost), pair, cost)
        assert best <= min(cost.c0, cost.c1) + 1e-12
        for size in rng.uniform(0.01, 0.99, size=3):
            assert best <= expected_cost(neyman_pearson_test(pair, float(size)), pair, cost) + 1e-12
        for t in rng.normal(0, 3, size=3):
            assert best <= expected_cost(ThresholdTest(float(t), float(rng.random())), pair, cost) + 1e-12


def test_rates_are_monotone_in_threshold():
    rng = np.random.default_rng(33)
    for _ in range(200):
        pair = _random_analytic_pair(rng)
        lo, hi = sorted(rng.normal(0, 3, size=2))
        low, high = error_rates(ThresholdTest(float(lo)), pair), error_rates(ThresholdTest(float(hi)), pair)
        assert high.alpha <= low.alpha + 1e-12
        assert high.beta >= low.beta - 1e-12


def test_discrete_np_size_is_exact():
    rng = np.random.default_rng(34)
    checked = 0
    while checked < 200:
        pair = _random_analytic_pair(rng)
        if not pair.is_discrete:
            continue
        size = float(rng.uniform(0.01, 0.99))
        test = neyman_pearson_test(pair, size)
        assert 0.0 <= test.boundary_randomization <= 1.0
        assert error_rates(test, pair).alpha == pytest.approx(size, abs=1e-12)
        checked += 1


def test_compare_costs(gaussian_pair):
    rows = compare_costs(gaussian_pair, [1.0, math.e], c1=1.0, np_size=0.05)
    assert [r.cost.c0 for r in rows] == [1.0, math.e]
    assert rows[0].np_cost == pytest.approx(0.05 + 0.36124, abs=1e-4)
    assert all(r.saving > 0 for r in rows)
    assert rows[1].optimal_rates.alpha == pytest.approx(0.06681, abs=1e-5)


@pytest.mark.parametrize("p0, p1", [
    (Bernoulli(0.2), Bernoulli(0.7)),
    (Poisson(3.0), Poisson(1.0)),
], ids=["bernoulli", "poisson-decreasing"])
def test_np_discrete_direction(p0, p1):
    pair = HypothesisPair(p0, p1, 4)
    test = neyman_pearson_test(pair, 0.2)
    rates = error_rates(test, pair)
    assert rates.alpha == pytest.approx(0.2, abs=1e-12)
    assert rates.power > 0.2


def _quadrature_rates(pair, t, lo=-40.0, hi=40.0):
    """alpha and beta of the plain test at t for one observation, by integrating each density."""
    def gap(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return pair.p1.log_density_array(x) - pair.p0.log_density_array(x) - t

    def density(model):
        return lambda x: float(np.exp(model.log_density_array(np.array([x]))[0]))

    # 0 is where exponential supports start
    grid = np.union1d(np.linspace(lo, hi, 8001), [0.0])
    values = gap(grid)
    cuts = {lo, 0.0, hi}
    for i in range(len(grid) - 1):
        v0, v1 = values[i], values[i + 1]
        if np.isfinite(v0) and np.isfinite(v1) and v0 * v1 < 0:
            cuts.add(optimize.brentq(lambda x: float(gap(x)[0]), grid[i], grid[i + 1], xtol=1e-14))
    cuts = sorted(cuts)

    alpha = beta = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if gap(0.5 * (a + b))[0] > 0:
            alpha += integrate.quad(density(pair.p0), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        else:
            beta += integrate.quad(density(pair.p1), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return alpha, beta


@pytest.mark.parametrize("p0, p1, thresholds", [
    (Gaussian(0.0, 1.0), Gaussian(0.5, 4.0), (-0.7, 0.0, 0.9, 2.5)),
    (Gaussian(1.0, 2.0), Gaussian(-0.5, 0.5), (-1.5, 0.3, 0.45)),
    (Gaussian(1.0, 1.0), Exponential(1.0), (-1.0, 0.2, 1.5)),
    (Exponential(2.0), Gaussian(0.5, 1.0), (-2.0, 0.1, 1.2)),
], ids=["gaussian-wider-alt", "gaussian-narrower-alt", "gaussian-vs-exponential", "exponential-vs-gaussian"])
def test_single_observation_rates_match_quadrature(p0, p1, thresholds):
    pair = HypothesisPair(p0, p1, 1)
    for t in thresholds:
        alpha, beta = _quadrature_rates(pair, t)
        rates = error_rates(ThresholdTest(t), pair)
        assert rates.alpha == pytest.approx(alpha, abs=1e-8)
        assert rates.beta == pytest.approx(beta, abs=1e-8)


def test_unequal_variance_rates_are_chi_square():
    # ln L = 0.375 * sum x^2 - 5 ln 2 for N(0, 1) against N(0, 4)
    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(0.0, 4.0), 5)
    for t in (-1.0, 0.0, 2.0):
        q = (t + 5 * math.log(2.0)) / 0.375
        rates = error_rates(ThresholdTest(t), pair)
        assert rates.alpha == pytest.approx(stats.chi2(5).sf(q), abs=1e-12)
        assert rates.beta == pytest.approx(stats.chi2(5).cdf(q / 4.0), abs=1e-12)


def test_unequal_variance_rates_match_simulation():
    from app.verification.montecarlo import estimate_error_rates

    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(1.0, 3.0), 4)
    test = ThresholdTest(0.5)
    rates = error_rates(test, pair)
    report = estimate_error_rates(test, pair, trials=200_000, seed=5, workers=1)
    assert report.covers(rates.alpha, rates.beta)


def test_unequal_variance_np_size():
    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(1.0, 3.0), 4)
    for size in (0.01, 0.05, 0.5):
        test = neyman_pearson_test(pair, size)
        assert test.boundary_randomization == 1.0
        assert error_rates(test, pair).alpha == pytest.approx(size, abs=1e-7)


def test_mixed_family_np_size():
    pair = HypothesisPair(Gaussian(1.0, 1.0), Exponential(1.0), 1)
    test = neyman_pearson_test(pair, 0.05)
    assert math.isfinite(test.llr_threshold)
    assert error_rates(test, pair).alpha == pytest.approx(0.05, abs=1e-10)

    # only P0(x > 0) can be reached with a finite threshold; the rest is randomized at -inf
    reachable = stats.norm(1.0, 1.0).sf(0.0)
    test = neyman_pearson_test(pair, 0.9)
    assert test.llr_threshold == -math.inf
    assert test.boundary_randomization == pytest.approx((0.9 - reachable) / (1.0 - reachable), abs=1e-12)
    rates = error_rates(test, pair)
    assert rates.alpha == pytest.approx(0.9, abs=1e-12)
    assert rates.beta == 0.0


def test_np_at_optimal_size_is_the_cost_optimal_test():
    rng = np.random.default_rng(35)
    checked = 0
    while checked < 200:
        pair = _random_analytic_pair(rng)
        if pair.is_discrete:
            continue
        ratio = float(np.exp(rng.uniform(-3.0, 3.0)))
        optimal = cost_optimal_test(pair, CostModel(ratio, 1.0))
        size = error_rates(optimal, pair).alpha
        if not 1e-4 < size < 1.0 - 1e-4:
            continue
        calibrated = neyman_pearson_test(pair, size)
        assert calibrated.llr_threshold == pytest.approx(math.log(ratio), abs=1e-9)
        assert calibrated.boundary_randomization == 1.0
        checked += 1
