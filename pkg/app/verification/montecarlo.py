"""Seeded simulation of error rates and realized costs.

Trials are grouped in blocks of ``BLOCK_TRIALS``. Block b draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(b,)))``: first the
H0 samples (block, N), then the H1 samples (block, N), then one uniform per
H0 trial and one per H1 trial for boundary randomization. Blocks are reduced
in index order, so reports are a pure function of (inputs, seed) whatever
the number of worker threads.
"""
import math
import numbers
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config.constants import BLOCK_TRIALS, CI_SIGMAS, MAX_WORKERS, MIN_TRIALS
from app.design.likelihood import HypothesisPair, log_likelihood_ratio_batch
from app.design.testdesign import (
    CostModel,
    ThresholdTest,
    cost_optimal_test,
    neyman_pearson_test,
    tie_mask,
)
from app.errors import InputError
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    alpha_hat: float
    beta_hat: float
    cost_hat: float
    alpha_ci_halfwidth: float
    beta_ci_halfwidth: float
    seed: int

    def covers(self, alpha: float, beta: float) -> bool:
        """True when both analytic rates lie inside the reported intervals."""
        return (abs(self.alpha_hat - alpha) <= self.alpha_ci_halfwidth
                and abs(self.beta_hat - beta) <= self.beta_ci_halfwidth)


@dataclass(frozen=True)
class PolicyComparison:
    """Neyman-Pearson against cost-optimal on common random samples."""

    trials: int
    seed: int
    cost: CostModel
    np_test: ThresholdTest
    optimal_test: ThresholdTest
    np_report: SimulationReport
    optimal_report: SimulationReport
    difference: float
    difference_ci_halfwidth: float

    @property
    def significant(self) -> bool:
        return self.difference > self.difference_ci_halfwidth


@dataclass
class _BlockTally:
    trials: int
    rejects0: List[int]
    accepts1: List[int]
    diff_sum: float = 0.0
    diff_sq_sum: float = 0.0


def binomial_halfwidth(rate: float, trials: int) -> float:
    return CI_SIGMAS * math.sqrt(rate * (1.0 - rate) / trials)


def _validate(trials: int, seed: int) -> None:
    if isinstance(trials, bool) or not isinstance(trials, numbers.Integral) or trials < MIN_TRIALS:
        raise InputError(f"trials must be an integer >= {MIN_TRIALS}, got {trials!r}")
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}")


def _blocks(trials: int) -> List[Tuple[int, int]]:
    full, rest = divmod(trials, BLOCK_TRIALS)
    sizes = [BLOCK_TRIALS] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def rejections(llr: np.ndarray, test: ThresholdTest, uniforms: np.ndarray) -> np.ndarray:
    """Vectorized decision rule; ``uniforms`` break boundary ties."""
    t = test.llr_threshold
    tie = tie_mask(llr, t)
    return ((llr > t) & ~tie) | (tie & (uniforms < test.boundary_randomization))


def _run_block(pair: HypothesisPair, tests: Sequence[ThresholdTest], cost: CostModel,
               seed: int, index: int, size: int) -> _BlockTally:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    shape = (size, pair.sample_size)
    x0 = pair.p0.draw(rng, shape)
    x1 = pair.p1.draw(rng, shape)
    u0 = rng.random(size)
    u1 = rng.random(size)
    llr0 = log_likelihood_ratio_batch(pair, x0)
    llr1 = log_likelihood_ratio_batch(pair, x1)

    tally = _BlockTally(trials=size, rejects0=[], accepts1=[])
    realized = []
    for test in tests:
        reject0 = rejections(llr0, test, u0)
        accept1 = ~rejections(llr1, test, u1)
        tally.rejects0.append(int(reject0.sum()))
        tally.accepts1.append(int(accept1.sum()))
        realized.append(cost.c0 * reject0 + cost.c1 * accept1)
    if len(realized) == 2:
        diff = realized[0] - realized[1]
        tally.diff_sum = float(diff.sum())
        tally.diff_sq_sum = float((diff * diff).sum())
    return tally


def _simulate(pair: HypothesisPair, tests: Sequence[ThresholdTest], cost: CostModel,
              trials: int, seed: int, workers: int) -> List[_BlockTally]:
    blocks = _blocks(trials)
    logger.info(f"simulating {trials} trials in {len(blocks)} blocks (seed={seed}, workers={workers})")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: _run_block(pair, tests, cost, seed, *b), blocks))
    return [_run_block(pair, tests, cost, seed, *b) for b in blocks]


def _report(tallies: List[_BlockTally], k: int, cost: CostModel, trials: int, seed: int) -> SimulationReport:
    rejects0 = sum(t.rejects0[k] for t in tallies)
    accepts1 = sum(t.accepts1[k] for t in tallies)
    alpha_hat = rejects0 / trials
    beta_hat = accepts1 / trials
    return SimulationReport(
        trials=trials,
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        cost_hat=cost.c0 * alpha_hat + cost.c1 * beta_hat,
        alpha_ci_halfwidth=binomial_halfwidth(alpha_hat, trials),
        beta_ci_halfwidth=binomial_halfwidth(beta_hat, trials),
        seed=seed,
    )


def estimate_error_rates(test: ThresholdTest, pair: HypothesisPair, trials: int, seed: int,
                         cost: Optional[CostModel] = None,
                         workers: int = MAX_WORKERS) -> SimulationReport:
    """Empirical alpha and beta of ``test`` from ``trials`` samples under each hypothesis.

    ``cost_hat`` uses ``cost`` when given, unit costs otherwise.
    """
    _validate(trials, seed)
    cost = cost or CostModel(1.0, 1.0)
    tallies = _simulate(pair, [test], cost, trials, seed, workers)
    return _report(tallies, 0, cost, trials, seed)


def compare_policies(pair: HypothesisPair, cost: CostModel, np_size: float, trials: int, seed: int,
                     workers: int = MAX_WORKERS) -> PolicyComparison:
    """Realized cost of the NP test against the cost-optimal test on shared samples."""
    _validate(trials, seed)
    np_test = neyman_pearson_test(pair, np_size)
    optimal = cost_optimal_test(pair, cost)
    tallies = _simulate(pair, [np_test, optimal], cost, trials, seed, workers)

    diff_sum = math.fsum(t.diff_sum for t in tallies)
    diff_sq_sum = math.fsum(t.diff_sq_sum for t in tallies)
    mean = diff_sum / trials
    variance = max(diff_sq_sum - trials * mean * mean, 0.0) / (trials - 1)
    return PolicyComparison(
        trials=trials,
        seed=seed,
        cost=cost,
        np_test=np_test,
        optimal_test=optimal,
        np_report=_report(tallies, 0, cost, trials, seed),
        optimal_report=_report(tallies, 1, cost, trials, seed),
        difference=mean,
        difference_ci_halfwidth=CI_SIGMAS * math.sqrt(variance / trials),
    )
