"""Log-likelihood ratios for i.i.d. samples and sufficient-statistic reductions.

All ratios are computed in log space: for N=100 Gaussian observations the
ratio itself overflows, while thresholds compare monotonically in the log.
"""
import math
import numbers
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.errors import (
    ImpossibleObservationError,
    InputError,
    MismatchedBaseMeasureError,
    UnsupportedReductionError,
)
from app.models.distributions import (
    Bernoulli,
    Binomial,
    DensityModel,
    Exponential,
    Gaussian,
    Poisson,
)
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class HypothesisPair:
    """Simple null ``p0`` against simple alternative ``p1`` for i.i.d. samples of size N."""

    p0: DensityModel
    p1: DensityModel
    sample_size: int = 1

    def __post_init__(self):
        for name, model in (("p0", self.p0), ("p1", self.p1)):
            if not isinstance(model, DensityModel):
                raise InputError(f"{name} must be a DensityModel, got {type(model).__name__}")
        if self.p0.base is not self.p1.base:
            raise MismatchedBaseMeasureError(
                f"p0 ({self.p0.family}) is on {self.p0.base.value} but "
                f"p1 ({self.p1.family}) is on {self.p1.base.value}")
        n = self.sample_size
        if isinstance(n, bool) or not isinstance(n, numbers.Integral) or n < 1:
            raise InputError(f"sample_size must be a positive integer, got {n!r}")
        if self.p0.same_law(self.p1):
            raise InputError(f"p0 ({self.p0.family}) and p1 ({self.p1.family}) define the same "
                             f"distribution; every test has alpha + power = 1")

    @property
    def is_discrete(self) -> bool:
        return self.p0.is_discrete

    def swapped(self) -> "HypothesisPair":
        return HypothesisPair(self.p1, self.p0, self.sample_size)


@dataclass(frozen=True)
class LinearReduction:
    """ln L = slope * S + intercept for a sufficient statistic S of the sample.

    ``law0`` and ``law1`` are frozen scipy distributions of S under each
    hypothesis; ``statistic`` is ``"mean"`` or ``"sum"``.
    """

    statistic: str
    slope: float
    intercept: float
    law0: Any
    law1: Any
    discrete: bool

    def __post_init__(self):
        if self.slope == 0.0 or not math.isfinite(self.slope):
            raise InputError(f"ln L does not depend on the {self.statistic} "
                             f"(slope {self.slope!r}); the hypotheses cannot be told apart")

    def statistic_of(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        if self.statistic == "mean":
            return samples.mean(axis=-1)
        return samples.sum(axis=-1)

    def llr(self, s):
        return self.slope * s + self.intercept

    def statistic_threshold(self, llr_threshold: float) -> float:
        """The value of S at which ln L equals ``llr_threshold``."""
        return (llr_threshold - self.intercept) / self.slope


def _check_sample(pair: HypothesisPair, observations) -> np.ndarray:
    arr = np.asarray(observations)
    if arr.ndim != 1:
        raise InputError(f"observations must be a flat list, got shape {arr.shape}")
    if arr.shape[0] != pair.sample_size:
        raise InputError(f"expected {pair.sample_size} observations, got {arr.shape[0]}")
    return pair.p0.check_observations(arr)


def log_likelihood_ratio(pair: HypothesisPair, observations: Sequence) -> float:
    """Return ln L = sum_i [ln p1(x_i) - ln p0(x_i)] for one sample of size N."""
    arr = _check_sample(pair, observations)
    l0 = pair.p0.log_density_array(arr)
    l1 = pair.p1.log_density_array(arr)

    null0 = np.isneginf(l0)
    null1 = np.isneginf(l1)
    both = null0 & null1
    if both.any():
        bad = arr[both][0]
        raise ImpossibleObservationError(f"observation {bad:g} has zero density under both hypotheses")
    if null0.any() and null1.any():
        raise ImpossibleObservationError("sample has zero product density under both hypotheses")

    return math.fsum(l1 - l0)


def log_likelihood_ratio_batch(pair: HypothesisPair, samples: np.ndarray) -> np.ndarray:
    """One ln L per row of an (M, N) array of samples.

    Uses the sufficient statistic when a linear reduction exists, so the
    values coincide exactly with the atoms used for exact error rates.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[1] != pair.sample_size:
        raise InputError(f"samples must have shape (M, {pair.sample_size}), got {samples.shape}")
    reduction = linear_reduction(pair)
    if reduction is not None:
        return reduction.llr(reduction.statistic_of(samples))

    values = pair.p0.check_observations(samples)
    with np.errstate(invalid="ignore"):
        llr = (pair.p1.log_density_array(values) - pair.p0.log_density_array(values)).sum(axis=1)
    if np.isnan(llr).any():
        raise ImpossibleObservationError("a sample has zero product density under both hypotheses")
    return llr


def linear_reduction(pair: HypothesisPair) -> Optional[LinearReduction]:
    """Closed-form sufficient-statistic reduction of the pair, or None."""
    p0, p1, n = pair.p0, pair.p1, pair.sample_size

    if isinstance(p0, Gaussian) and isinstance(p1, Gaussian) and p0.variance == p1.variance:
        v = p0.variance
        delta = p1.mean - p0.mean
        scale = math.sqrt(v / n)
        return LinearReduction(
            statistic="mean",
            slope=n * delta / v,
            intercept=-n * delta * (p0.mean + p1.mean) / (2.0 * v),
            law0=stats.norm(loc=p0.mean, scale=scale),
            law1=stats.norm(loc=p1.mean, scale=scale),
            discrete=False,
        )

    if isinstance(p0, Exponential) and isinstance(p1, Exponential):
        return LinearReduction(
            statistic="sum",
            slope=-(p1.rate - p0.rate),
            intercept=n * math.log(p1.rate / p0.rate),
            law0=stats.gamma(a=n, scale=1.0 / p0.rate),
            law1=stats.gamma(a=n, scale=1.0 / p1.rate),
            discrete=False,
        )

    if isinstance(p0, Poisson) and isinstance(p1, Poisson):
        return LinearReduction(
            statistic="sum",
            slope=math.log(p1.rate / p0.rate),
            intercept=-n * (p1.rate - p0.rate),
            law0=stats.poisson(n * p0.rate),
            law1=stats.poisson(n * p1.rate),
            discrete=True,
        )

    trials = _common_trials(p0, p1)
    if trials is not None:
        log_fail = math.log((1.0 - p1.p) / (1.0 - p0.p))
        return LinearReduction(
            statistic="sum",
            slope=math.log(p1.p / p0.p) - log_fail,
            intercept=n * trials * log_fail,
            law0=stats.binom(n * trials, p0.p),
            law1=stats.binom(n * trials, p1.p),
            discrete=True,
        )

    return None


def _common_trials(p0: DensityModel, p1: DensityModel) -> Optional[int]:
    """Number of Bernoulli trials per observation when both models are binomial-like with equal trials."""
    def trials_of(model):
        if isinstance(model, Bernoulli):
            return 1
        if isinstance(model, Binomial):
            return int(model.trials)
        return None

    t0, t1 = trials_of(p0), trials_of(p1)
    if t0 is None or t0 != t1:
        return None
    return t0


def statistic_pair(pair: HypothesisPair) -> Tuple[DensityModel, DensityModel]:
    """Single-observation models of the sufficient statistic.

    For N=1 this is the pair itself. For N > 1 the statistic must have a law
    inside the supported families (Gaussian mean, Poisson or binomial sum).
    """
    p0, p1, n = pair.p0, pair.p1, pair.sample_size
    if n == 1:
        return p0, p1
    if isinstance(p0, Gaussian) and isinstance(p1, Gaussian) and p0.variance == p1.variance:
        return Gaussian(p0.mean, p0.variance / n), Gaussian(p1.mean, p1.variance / n)
    if isinstance(p0, Poisson) and isinstance(p1, Poisson):
        return Poisson(n * p0.rate), Poisson(n * p1.rate)
    trials = _common_trials(p0, p1)
    if trials is not None:
        return Binomial(n * trials, p0.p), Binomial(n * trials, p1.p)
    raise UnsupportedReductionError(
        f"no single-observation statistic for {p0.family} vs {p1.family} with N={n}")


def mean_threshold(pair: HypothesisPair, llr_threshold: float) -> float:
    """Sample-mean cutoff c with {ln L >= t} = {mean >= c} for equal-variance Gaussians."""
    p0, p1 = pair.p0, pair.p1
    if not (isinstance(p0, Gaussian) and isinstance(p1, Gaussian)):
        raise UnsupportedReductionError(
            f"mean cutoff needs two gaussian models, got {p0.family} and {p1.family}")
    if p0.variance != p1.variance:
        raise UnsupportedReductionError(
            f"mean cutoff needs equal variances, got {p0.variance} and {p1.variance}")
    if p0.mean >= p1.mean:
        raise InputError(f"mean cutoff needs m0 < m1, got m0={p0.mean}, m1={p1.mean}")
    delta = p1.mean - p0.mean
    return p0.variance * llr_threshold / (pair.sample_size * delta) + (p0.mean + p1.mean) / 2.0
