"""Cost-optimal and Neyman-Pearson likelihood-ratio tests, their error rates and costs.

A test rejects H0 when ln L > t, and with probability gamma when ln L = t.
The cost-optimal test uses t = ln(c0/c1) with gamma = 1; Neyman-Pearson
tests pick t (and gamma, in discrete families) to hit a prescribed size.
"""
import functools
import math
import numbers
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from app.config.constants import LLR_TIE_TOLERANCE, MAX_CONVOLUTION_STATES, POISSON_TAIL_MASS
from app.design.likelihood import (
    HypothesisPair,
    LinearReduction,
    linear_reduction,
    log_likelihood_ratio,
)
from app.errors import InputError, NotAnalyticallyEvaluableError, UnsupportedReductionError
from app.models.distributions import Gaussian
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class CostModel:
    """c0: cost of rejecting H0 when true; c1: cost of rejecting H1 when true."""

    c0: float
    c1: float

    def __post_init__(self):
        for name in ("c0", "c1"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, numbers.Real):
                raise InputError(f"{name} must be a real number, got {value!r}")
            if not (math.isfinite(value) and value > 0):
                raise InputError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def ratio(self) -> float:
        return self.c0 / self.c1


@dataclass(frozen=True)
class ThresholdTest:
    """Reject H0 iff ln L > t, or ln L = t with probability ``boundary_randomization``."""

    llr_threshold: float
    boundary_randomization: float = 1.0

    def __post_init__(self):
        if math.isnan(self.llr_threshold):
            raise InputError("llr_threshold is NaN")
        g = self.boundary_randomization
        if math.isnan(g) or not (0.0 <= g <= 1.0):
            raise InputError(f"boundary_randomization must lie in [0, 1], got {g!r}")

    @classmethod
    def always_accept(cls) -> "ThresholdTest":
        return cls(math.inf, 0.0)

    @classmethod
    def always_reject(cls) -> "ThresholdTest":
        return cls(-math.inf, 1.0)

    @property
    def is_randomized(self) -> bool:
        return 0.0 < self.boundary_randomization < 1.0


@dataclass(frozen=True)
class ErrorRates:
    alpha: float
    beta: float

    @property
    def power(self) -> float:
        return 1.0 - self.beta


class Decision(str, Enum):
    ACCEPT_H0 = "accept-H0"
    REJECT_H0 = "reject-H0"


@dataclass(frozen=True)
class CostComparison:
    """One row of a cost comparison between the NP test and the cost-optimal test."""

    cost: CostModel
    np_test: ThresholdTest
    np_rates: ErrorRates
    np_cost: float
    optimal_test: ThresholdTest
    optimal_rates: ErrorRates
    optimal_cost: float

    @property
    def saving(self) -> float:
        return self.np_cost - self.optimal_cost


def is_tie(value: float, threshold: float) -> bool:
    if math.isinf(value) or math.isinf(threshold):
        return value == threshold
    return math.isclose(value, threshold, rel_tol=LLR_TIE_TOLERANCE, abs_tol=LLR_TIE_TOLERANCE)


def tie_mask(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.isclose(values, threshold, rtol=LLR_TIE_TOLERANCE, atol=LLR_TIE_TOLERANCE)


# --- laws of the log-likelihood ratio under H0 and H1 ---------------------

class LLRLaw(ABC):
    """Distribution of ln L under each hypothesis."""

    @abstractmethod
    def split(self, t: float, hypothesis: int) -> Tuple[float, float, float]:
        """(P(ln L < t), P(ln L = t), P(ln L > t)) under H0 (0) or H1 (1)."""

    @abstractmethod
    def size_threshold(self, size: float) -> ThresholdTest:
        """The LR test with P0(reject) equal to ``size``."""


class ContinuousLLRLaw(LLRLaw):
    """ln L is an affine function of a continuous sufficient statistic."""

    def __init__(self, reduction: LinearReduction):
        self.reduction = reduction

    def split(self, t: float, hypothesis: int) -> Tuple[float, float, float]:
        law = self.reduction.law0 if hypothesis == 0 else self.reduction.law1
        s = self.reduction.statistic_threshold(t)
        below, above = float(law.cdf(s)), float(law.sf(s))
        if self.reduction.slope > 0:
            return below, 0.0, above
        return above, 0.0, below

    def size_threshold(self, size: float) -> ThresholdTest:
        law0 = self.reduction.law0
        s = float(law0.isf(size)) if self.reduction.slope > 0 else float(law0.ppf(size))
        return ThresholdTest(float(self.reduction.llr(s)), 1.0)


class QuadraticLLRLaw(LLRLaw):
    """Gaussians with unequal variances: ln L = a * sum (x_i - h)^2 + offset.

    Under H_j, sum (x_i - h)^2 / v_j is noncentral chi-square with N degrees
    of freedom and noncentrality N (m_j - h)^2 / v_j.
    """

    def __init__(self, pair: HypothesisPair):
        p0, p1, n = pair.p0, pair.p1, pair.sample_size
        self.a = 0.5 / p0.variance - 0.5 / p1.variance
        b = p0.mean / p0.variance - p1.mean / p1.variance
        self.h = b / (2.0 * self.a)
        per_observation = (-self.a * self.h ** 2
                           + p0.mean ** 2 / (2.0 * p0.variance) - p1.mean ** 2 / (2.0 * p1.variance)
                           - 0.5 * math.log(p1.variance / p0.variance))
        self.offset = n * per_observation
        self.scales = (self.a * p0.variance, self.a * p1.variance)
        self.laws = tuple(self._chi2_law(n, model) for model in (p0, p1))

    def _chi2_law(self, n: int, model):
        nc = n * (model.mean - self.h) ** 2 / model.variance
        if nc == 0.0:
            return stats.chi2(df=n)
        return stats.ncx2(df=n, nc=nc)

    def split(self, t: float, hypothesis: int) -> Tuple[float, float, float]:
        law, scale = self.laws[hypothesis], self.scales[hypothesis]
        if math.isinf(t):
            return (0.0, 0.0, 1.0) if t < 0 else (1.0, 0.0, 0.0)
        q = (t - self.offset) / scale
        below, above = float(law.cdf(q)), float(law.sf(q))
        if self.a > 0:
            return below, 0.0, above
        return above, 0.0, below

    def size_threshold(self, size: float) -> ThresholdTest:
        law, scale = self.laws[0], self.scales[0]
        q = float(law.isf(size)) if self.a > 0 else float(law.ppf(size))
        return ThresholdTest(scale * q + self.offset, 1.0)


class ScalarLLRLaw(LLRLaw):
    """One continuous observation whose log densities are polynomials of degree <= 2.

    On the common support ln L is a quadratic in x, so {ln L > t} is a union of
    at most three intervals whose probabilities come from the model cdfs.
    Outside the common support ln L is -inf (only p0 positive) or +inf (only
    p1 positive).
    """

    def __init__(self, pair: HypothesisPair):
        self.models = (pair.p0, pair.p1)
        lo0, hi0 = pair.p0.support_interval()
        lo1, hi1 = pair.p1.support_interval()
        self.lo, self.hi = max(lo0, lo1), min(hi0, hi1)
        if not self.lo < self.hi:
            raise NotAnalyticallyEvaluableError(
                f"{pair.p0.family} and {pair.p1.family} have disjoint supports")
        c0 = pair.p0.log_density_polynomial()
        c1 = pair.p1.log_density_polynomial()
        self.coef = tuple(b - a for a, b in zip(c0, c1))
        # p1-only mass sits at ln L = +inf, p0-only mass at -inf
        self.plus_inf = self._outside(pair.p1.support_interval())
        self.minus_inf = self._outside(pair.p0.support_interval())

    def _outside(self, interval: Tuple[float, float]) -> List[Tuple[float, float]]:
        lo, hi = interval
        pieces = []
        if lo < self.lo:
            pieces.append((lo, self.lo))
        if self.hi < hi:
            pieces.append((self.hi, hi))
        return pieces

    def llr(self, x: float) -> float:
        a, b, c = self.coef
        return a * x * x + b * x + c

    def _roots(self, t: float) -> List[float]:
        a, b, c = self.coef
        c -= t
        if a == 0.0:
            return [] if b == 0.0 else [-c / b]
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return []
        # stable quadratic formula
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [q / a]
        if q != 0.0:
            roots.append(c / q)
        return sorted(set(roots))

    @staticmethod
    def _mass(model, lo: float, hi: float) -> float:
        if math.isinf(hi):
            return model.sf(lo) if math.isfinite(lo) else 1.0
        return max(model.cdf(hi) - model.cdf(lo), 0.0)

    def split(self, t: float, hypothesis: int) -> Tuple[float, float, float]:
        model = self.models[hypothesis]
        plus = math.fsum(self._mass(model, lo, hi) for lo, hi in self.plus_inf)
        minus = math.fsum(self._mass(model, lo, hi) for lo, hi in self.minus_inf)
        if t == math.inf:
            return 1.0 - plus, plus, 0.0
        if t == -math.inf:
            return 0.0, minus, 1.0 - minus

        cuts = [self.lo] + [r for r in self._roots(t) if self.lo < r < self.hi] + [self.hi]
        less, greater = [minus], [plus]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if math.isinf(lo) and math.isinf(hi):
                inside = 0.0
            elif math.isinf(lo):
                inside = hi - 1.0
            elif math.isinf(hi):
                inside = lo + 1.0
            else:
                inside = 0.5 * (lo + hi)
            (greater if self.llr(inside) > t else less).append(self._mass(model, lo, hi))
        return math.fsum(less), 0.0, math.fsum(greater)

    def size_threshold(self, size: float) -> ThresholdTest:
        reachable = self.split(-math.inf, 0)[2]
        if size >= reachable:
            # the rest of the size comes from the p0-only region at ln L = -inf
            minus = 1.0 - reachable
            gamma = (size - reachable) / minus if minus > 0 else 1.0
            return ThresholdTest(-math.inf, min(max(gamma, 0.0), 1.0))

        def excess(t: float) -> float:
            return self.split(t, 0)[2] - size

        lo, hi = -1.0, 1.0
        for _ in range(200):
            if excess(lo) >= 0:
                break
            lo *= 2.0
        for _ in range(200):
            if excess(hi) <= 0:
                break
            hi *= 2.0
        t = optimize.brentq(excess, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=500)
        logger.info(f"size {size:g} calibrated by root search at ln L={t:.10g}")
        return ThresholdTest(float(t), 1.0)


class AtomicLLRLaw(LLRLaw):
    """ln L takes finitely many values; atoms sorted ascending, ties merged."""

    def __init__(self, llr: np.ndarray, mass0: np.ndarray, mass1: np.ndarray):
        self.llr, self.mass0, self.mass1 = merge_atoms(llr, mass0, mass1)

    def __len__(self) -> int:
        return len(self.llr)

    def split(self, t: float, hypothesis: int) -> Tuple[float, float, float]:
        masses = self.mass0 if hypothesis == 0 else self.mass1
        tie = tie_mask(self.llr, t)
        less = math.fsum(masses[(self.llr < t) & ~tie])
        equal = math.fsum(masses[tie])
        greater = math.fsum(masses[(self.llr > t) & ~tie])
        return less, equal, greater

    def size_threshold(self, size: float) -> ThresholdTest:
        upper = 0.0  # P0(ln L > current atom)
        for i in range(len(self.llr) - 1, -1, -1):
            mass = float(self.mass0[i])
            if upper + mass >= size:
                gamma = (size - upper) / mass if mass > 0 else 0.0
                if not 0.0 <= gamma <= 1.0:
                    logger.warning(f"randomization {gamma!r} clipped to [0, 1]")
                    gamma = min(max(gamma, 0.0), 1.0)
                logger.info(f"size {size:g} calibrated at atom ln L={self.llr[i]:.6g} "
                            f"with randomization {gamma:.6g}")
                return ThresholdTest(float(self.llr[i]), gamma)
            upper += mass
        # truncated tails can leave the cumulative mass a hair below 1
        logger.warning(f"size {size:g} not reached by enumerated mass {upper!r}; using lowest atom")
        return ThresholdTest(float(self.llr[0]), 1.0)


def merge_atoms(llr: np.ndarray, mass0: np.ndarray, mass1: np.ndarray):
    """Sort atoms by ln L and merge values within the tie tolerance."""
    llr = np.asarray(llr, dtype=float)
    mass0 = np.asarray(mass0, dtype=float)
    mass1 = np.asarray(mass1, dtype=float)
    keep = (mass0 > 0) | (mass1 > 0)
    llr, mass0, mass1 = llr[keep], mass0[keep], mass1[keep]
    order = np.argsort(llr, kind="stable")
    llr, mass0, mass1 = llr[order], mass0[order], mass1[order]

    out_llr, out0, out1 = [], [], []
    for value, a, b in zip(llr, mass0, mass1):
        if out_llr and is_tie(value, out_llr[-1]):
            out0[-1] += a
            out1[-1] += b
        else:
            out_llr.append(float(value))
            out0.append(float(a))
            out1.append(float(b))
    return np.array(out_llr), np.array(out0), np.array(out1)


def _reduction_atoms(reduction: LinearReduction) -> AtomicLLRLaw:
    top = 0
    for law in (reduction.law0, reduction.law1):
        lo, hi = law.support()
        if math.isfinite(hi):
            top = max(top, int(hi))
            continue
        k = int(law.isf(POISSON_TAIL_MASS))
        while law.sf(k) >= POISSON_TAIL_MASS:
            k += 1
        top = max(top, k)
    s = np.arange(0, top + 1, dtype=float)
    logger.info(f"enumerating sufficient statistic on 0..{top}")
    return AtomicLLRLaw(reduction.llr(s), reduction.law0.pmf(s), reduction.law1.pmf(s))


def _single_observation_atoms(pair: HypothesisPair) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    atoms = np.union1d(pair.p0.support_atoms(POISSON_TAIL_MASS),
                       pair.p1.support_atoms(POISSON_TAIL_MASS)).astype(float)
    l0 = pair.p0.log_density_array(atoms)
    l1 = pair.p1.log_density_array(atoms)
    keep = ~(np.isneginf(l0) & np.isneginf(l1))
    l0, l1 = l0[keep], l1[keep]
    with np.errstate(invalid="ignore"):
        llr = l1 - l0
    return llr, np.exp(l0), np.exp(l1)


def _convolve(base: AtomicLLRLaw, times: int) -> AtomicLLRLaw:
    """Law of the sum of ``times`` i.i.d. copies of a single-observation ln L."""
    current = base
    for step in range(1, times):
        states = len(current) * len(base)
        if states > MAX_CONVOLUTION_STATES:
            raise NotAnalyticallyEvaluableError(
                f"exact convolution needs {states} states at step {step + 1}/{times} "
                f"(limit {MAX_CONVOLUTION_STATES}); use the Monte Carlo estimate")
        with np.errstate(invalid="ignore"):
            llr = np.add.outer(current.llr, base.llr).ravel()
        mass0 = np.multiply.outer(current.mass0, base.mass0).ravel()
        mass1 = np.multiply.outer(current.mass1, base.mass1).ravel()
        valid = ~np.isnan(llr)
        current = AtomicLLRLaw(llr[valid], mass0[valid], mass1[valid])
    return current


@functools.lru_cache(maxsize=64)
def llr_law(pair: HypothesisPair) -> LLRLaw:
    """Exact law of ln L for the pair, or NotAnalyticallyEvaluableError."""
    reduction = linear_reduction(pair)
    if reduction is not None and not reduction.discrete:
        return ContinuousLLRLaw(reduction)
    if reduction is not None:
        return _reduction_atoms(reduction)
    if pair.is_discrete:
        base = AtomicLLRLaw(*_single_observation_atoms(pair))
        if pair.sample_size == 1:
            return base
        return _convolve(base, pair.sample_size)
    if isinstance(pair.p0, Gaussian) and isinstance(pair.p1, Gaussian):
        return QuadraticLLRLaw(pair)
    if pair.sample_size == 1:
        try:
            return ScalarLLRLaw(pair)
        except UnsupportedReductionError:
            pass
    raise NotAnalyticallyEvaluableError(
        f"no analytic law of ln L for {pair.p0.family}{pair.p0.params()} vs "
        f"{pair.p1.family}{pair.p1.params()} with N={pair.sample_size}; "
        f"use the Monte Carlo estimate")


# --- operations -------------------------------------------------------------

def cost_optimal_test(pair: HypothesisPair, cost: CostModel) -> ThresholdTest:
    """The deterministic LR test with threshold ln(c0/c1)."""
    if not isinstance(pair, HypothesisPair):
        raise InputError("pair must be a HypothesisPair")
    t = math.log(cost.ratio)
    logger.info(f"cost-optimal threshold ln({cost.c0:g}/{cost.c1:g}) = {t:.6g}")
    return ThresholdTest(t, 1.0)


def neyman_pearson_test(pair: HypothesisPair, size: float) -> ThresholdTest:
    """The LR test of exact size ``size`` (randomized at one atom in discrete families)."""
    if isinstance(size, bool) or not isinstance(size, numbers.Real) or not (0.0 < size < 1.0):
        raise InputError(f"size must lie in (0, 1), got {size!r}")
    return llr_law(pair).size_threshold(float(size))


def error_rates(test: ThresholdTest, pair: HypothesisPair) -> ErrorRates:
    """alpha = P0(reject), beta = P1(accept), evaluated exactly."""
    law = llr_law(pair)
    t, gamma = test.llr_threshold, test.boundary_randomization
    _, eq0, gt0 = law.split(t, 0)
    lt1, eq1, _ = law.split(t, 1)
    alpha = gt0 + gamma * eq0
    beta = lt1 + (1.0 - gamma) * eq1
    return ErrorRates(min(max(alpha, 0.0), 1.0), min(max(beta, 0.0), 1.0))


def expected_cost(test: ThresholdTest, pair: HypothesisPair, cost: CostModel) -> float:
    """J = c0 * alpha + c1 * beta."""
    rates = error_rates(test, pair)
    return cost.c0 * rates.alpha + cost.c1 * rates.beta


def decide(test: ThresholdTest, pair: HypothesisPair, observations: Sequence, seed: int) -> Decision:
    """Apply the test to one sample; the boundary coin is drawn from ``seed``."""
    llr = log_likelihood_ratio(pair, observations)
    gamma = test.boundary_randomization
    if is_tie(llr, test.llr_threshold):
        if gamma >= 1.0:
            reject = True
        elif gamma <= 0.0:
            reject = False
        else:
            reject = bool(np.random.default_rng(seed).random() < gamma)
    else:
        reject = llr > test.llr_threshold
    return Decision.REJECT_H0 if reject else Decision.ACCEPT_H0


def implied_cost_ratio(test: ThresholdTest) -> float:
    """The c0/c1 for which this LR test is the cost-optimal test."""
    return math.exp(test.llr_threshold)


def compare_costs(pair: HypothesisPair, c0_values: Iterable[float], c1: float = 1.0,
                  np_size: float = 0.05) -> List[CostComparison]:
    """Expected cost of the size-``np_size`` NP test against the cost-optimal test, per c0."""
    np_test = neyman_pearson_test(pair, np_size)
    np_rates = error_rates(np_test, pair)
    rows = []
    for c0 in c0_values:
        cost = CostModel(c0, c1)
        optimal = cost_optimal_test(pair, cost)
        optimal_rates = error_rates(optimal, pair)
        rows.append(CostComparison(
            cost=cost,
            np_test=np_test,
            np_rates=np_rates,
            np_cost=cost.c0 * np_rates.alpha + cost.c1 * np_rates.beta,
            optimal_test=optimal,
            optimal_rates=optimal_rates,
            optimal_cost=cost.c0 * optimal_rates.alpha + cost.c1 * optimal_rates.beta,
        ))
    return rows
