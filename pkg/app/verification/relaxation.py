"""Finite-instance oracle for the relaxed cost minimization.

On a finite observation space the cost of a critical region C is
sum_{i in C} (c0 q0[i] - c1 q1[i]) + c1. Relaxing indicators to
allocations f with entries in [0, 1] makes the problem linear over a box,
so the pointwise minimizer is an indicator, and f* is optimal exactly when
every directional derivative sum (f - f*)(c0 q0 - c1 q1) is nonnegative.
This module computes the relaxed minimizer, the exhaustive indicator
minimum, and the directional derivatives, and runs them in batches.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config.constants import (
    BRUTE_FORCE_MAX_ATOMS,
    DISCRETIZE_TAIL_MASS,
    MASS_TOLERANCE,
    MIN_CAPTURED_MASS,
    RELAXATION_TOLERANCE,
)
from app.design.likelihood import HypothesisPair, statistic_pair
from app.design.testdesign import CostModel
from app.errors import DiscretizationError, EnumerationLimitError, InputError
from app.models.distributions import Tabulated
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


def _frozen_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    """Two probability vectors on the same n atoms."""

    q0: np.ndarray
    q1: np.ndarray
    atoms: Optional[np.ndarray] = None

    def __post_init__(self):
        q0 = _frozen_vector(self.q0, "q0")
        q1 = _frozen_vector(self.q1, "q1")
        if q0.shape != q1.shape:
            raise InputError(f"q0 has {q0.size} atoms but q1 has {q1.size}")
        for name, q in (("q0", q0), ("q1", q1)):
            if (q < 0).any():
                raise InputError(f"{name} has negative entries")
            total = math.fsum(q)
            if abs(total - 1.0) > MASS_TOLERANCE:
                raise InputError(f"{name} sums to {total!r}, expected 1 within {MASS_TOLERANCE:g}")
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "q1", q1)
        if self.atoms is not None:
            atoms = _frozen_vector(self.atoms, "atoms")
            if atoms.shape != q0.shape:
                raise InputError("atoms and probability vectors differ in length")
            object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return int(self.q0.size)

    def coefficients(self, cost: CostModel) -> np.ndarray:
        """c0 q0 - c1 q1, the per-atom marginal cost of rejecting."""
        return cost.c0 * self.q0 - cost.c1 * self.q1


@dataclass(frozen=True, eq=False)
class RelaxedAllocation:
    """A rejection probability per atom."""

    f: np.ndarray

    def __post_init__(self):
        f = _frozen_vector(self.f, "allocation")
        if (f < 0).any() or (f > 1).any():
            raise InputError("allocation entries must lie in [0, 1]")
        object.__setattr__(self, "f", f)

    @property
    def n(self) -> int:
        return int(self.f.size)

    def is_indicator(self) -> bool:
        return bool(np.all((self.f == 0.0) | (self.f == 1.0)))

    def support(self) -> FrozenSet[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.f == 1.0))


class RelaxedSolution(NamedTuple):
    allocation: RelaxedAllocation
    value: float

    def expected_cost(self, cost: CostModel) -> float:
        return self.value + cost.c1


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise InputError(f"grid needs finite lo < hi, got {self.lo}:{self.hi}")
        if self.n < 2:
            raise InputError(f"grid needs n >= 2 points, got {self.n}")

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"grid must look like lo:hi:n, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as e:
            raise InputError(f"grid {text!r}: {e}") from e

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class InstanceCheck:
    index: int
    n: int
    c0: float
    c1: float
    relaxed_value: float
    brute_force_value: Optional[float]
    min_derivative: float

    @property
    def gap(self) -> Optional[float]:
        if self.brute_force_value is None:
            return None
        return abs(self.relaxed_value - self.brute_force_value)

    @property
    def tight(self) -> bool:
        return self.gap is not None and self.gap <= RELAXATION_TOLERANCE

    @property
    def variational_inequality_holds(self) -> bool:
        return self.min_derivative >= -RELAXATION_TOLERANCE


@dataclass(frozen=True)
class RelaxationSummary:
    seed: int
    directions: int
    checks: List[InstanceCheck] = field(default_factory=list)

    @property
    def instances(self) -> int:
        return len(self.checks)

    @property
    def tight_count(self) -> int:
        return sum(1 for c in self.checks if c.tight)

    @property
    def max_gap(self) -> float:
        gaps = [c.gap for c in self.checks if c.gap is not None]
        return max(gaps) if gaps else 0.0

    @property
    def min_derivative(self) -> float:
        return min((c.min_derivative for c in self.checks), default=0.0)

    @property
    def all_ok(self) -> bool:
        return all(c.tight and c.variational_inequality_holds for c in self.checks)

    def headline(self) -> str:
        bound = f">= -{RELAXATION_TOLERANCE:g}" if self.min_derivative >= -RELAXATION_TOLERANCE \
            else f"< -{RELAXATION_TOLERANCE:g}"
        return (f"{self.tight_count}/{self.instances} tight, "
                f"min directional derivative {bound} ({self.min_derivative:.3g})")


# --- instances ---------------------------------------------------------------

def discretize(pair: HypothesisPair, grid: Optional[Grid] = None) -> FiniteInstance:
    """Bring a pair onto finitely many atoms.

    Continuous pairs are evaluated on the grid and renormalized; discrete
    pairs are truncated to atoms holding all but 1e-12 of the mass. For
    N > 1 the pair is first replaced by the laws of its sufficient statistic.
    """
    p0, p1 = statistic_pair(pair)

    if isinstance(p0, Tabulated) and isinstance(p1, Tabulated):
        atoms = np.union1d(p0.support, p1.support).astype(float)
        q0, q1 = np.exp(p0.log_density_array(atoms)), np.exp(p1.log_density_array(atoms))
        return FiniteInstance(q0 / q0.sum(), q1 / q1.sum(), atoms)

    if p0.is_discrete:
        if grid is not None:
            logger.info("grid ignored for a discrete pair")
        atoms = np.union1d(p0.support_atoms(DISCRETIZE_TAIL_MASS),
                           p1.support_atoms(DISCRETIZE_TAIL_MASS)).astype(float)
        raw0 = np.exp(p0.log_density_array(atoms))
        raw1 = np.exp(p1.log_density_array(atoms))
        for name, raw in (("p0", raw0), ("p1", raw1)):
            if raw.sum() < 1.0 - DISCRETIZE_TAIL_MASS:
                raise DiscretizationError(f"{name}: enumerated atoms hold only {raw.sum():.15f} of the mass")
        return FiniteInstance(raw0 / raw0.sum(), raw1 / raw1.sum(), atoms)

    if grid is None:
        raise InputError("a continuous pair needs a grid lo:hi:n")
    for name, model in (("p0", p0), ("p1", p1)):
        captured = model.cdf(grid.hi) - model.cdf(grid.lo)
        if captured < MIN_CAPTURED_MASS:
            raise DiscretizationError(
                f"grid [{grid.lo:g}, {grid.hi:g}] captures only {captured:.4f} of {name} "
                f"({model.family}{model.params()}); need at least {MIN_CAPTURED_MASS}")
        if captured < 1.0 - (1.0 - MIN_CAPTURED_MASS) / 10.0:
            logger.warning(f"grid captures {captured:.5f} of {name}")
    points = grid.points()
    raw0 = np.exp(p0.log_density_array(points))
    raw1 = np.exp(p1.log_density_array(points))
    return FiniteInstance(raw0 / raw0.sum(), raw1 / raw1.sum(), points)


def random_instance(rng: np.random.Generator, n: int) -> FiniteInstance:
    """Two independent uniform draws from the probability simplex on n atoms."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    q0 = rng.dirichlet(np.ones(n))
    q1 = rng.dirichlet(np.ones(n))
    return FiniteInstance(q0 / q0.sum(), q1 / q1.sum())


# --- operations -------------------------------------------------------------

def relaxed_objective(inst: FiniteInstance, cost: CostModel, f: RelaxedAllocation) -> float:
    _check_length(inst, f)
    return math.fsum(f.f * inst.coefficients(cost))


def relaxed_minimum(inst: FiniteInstance, cost: CostModel) -> RelaxedSolution:
    """Pointwise minimizer of the relaxed problem; zero coefficients go to f* = 1."""
    coef = inst.coefficients(cost)
    f = np.where(coef <= 0.0, 1.0, 0.0)
    value = math.fsum(coef[f == 1.0])
    return RelaxedSolution(RelaxedAllocation(f), value)


def brute_force_indicator_minimum(inst: FiniteInstance, cost: CostModel) -> Tuple[FrozenSet[int], float]:
    """Minimum of the indicator cost over all 2^n critical regions."""
    n = inst.n
    if n > BRUTE_FORCE_MAX_ATOMS:
        raise EnumerationLimitError(f"{n} atoms exceed the brute-force limit of {BRUTE_FORCE_MAX_ATOMS}")
    coef = inst.coefficients(cost)

    # bit i of the index says whether atom i is in the region
    values = np.zeros(1)
    for c in coef:
        values = np.concatenate([values, values + c])

    relaxed_index = sum(1 << i for i in relaxed_minimum(inst, cost).allocation.support())
    best_value = values.min()
    if values[relaxed_index] <= best_value + RELAXATION_TOLERANCE:
        best = relaxed_index
    else:
        best = int(np.argmin(values))
    subset = frozenset(i for i in range(n) if best >> i & 1)
    return subset, math.fsum(coef[sorted(subset)]) if subset else 0.0


def directional_derivative(inst: FiniteInstance, cost: CostModel,
                           f_star: RelaxedAllocation, f: RelaxedAllocation) -> float:
    """J'(f*; f - f*) = sum (f - f*)(c0 q0 - c1 q1)."""
    _check_length(inst, f_star)
    _check_length(inst, f)
    return math.fsum((f.f - f_star.f) * inst.coefficients(cost))


def vertex_directions(f: RelaxedAllocation) -> List[RelaxedAllocation]:
    """The 2n allocations that differ from f in one atom set to 0 or 1."""
    out = []
    for i in range(f.n):
        for value in (0.0, 1.0):
            g = f.f.copy()
            g[i] = value
            out.append(RelaxedAllocation(g))
    return out


def random_directions(rng: np.random.Generator, n: int, count: int) -> List[RelaxedAllocation]:
    return [RelaxedAllocation(row) for row in rng.random((count, n))]


def min_directional_derivative(inst: FiniteInstance, cost: CostModel, f: RelaxedAllocation,
                               directions: Sequence[RelaxedAllocation]) -> float:
    if not directions:
        return 0.0
    return min(directional_derivative(inst, cost, f, g) for g in directions)


def _check_length(inst: FiniteInstance, f: RelaxedAllocation) -> None:
    if f.n != inst.n:
        raise InputError(f"allocation has {f.n} entries but the instance has {inst.n} atoms")


def _check_instance(index: int, seed_seq: np.random.SeedSequence, max_atoms: int,
                    directions: int) -> InstanceCheck:
    rng = np.random.default_rng(seed_seq)
    n = int(rng.integers(1, max_atoms + 1))
    inst = random_instance(rng, n)
    cost = CostModel(float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.1, 10.0)))
    solution = relaxed_minimum(inst, cost)
    _, brute_value = brute_force_indicator_minimum(inst, cost)
    tested = random_directions(rng, n, directions) + vertex_directions(solution.allocation)
    return InstanceCheck(
        index=index,
        n=n,
        c0=cost.c0,
        c1=cost.c1,
        relaxed_value=solution.value,
        brute_force_value=brute_value,
        min_derivative=min_directional_derivative(inst, cost, solution.allocation, tested),
    )


def verify_instances(count: int, max_atoms: int, seed: int, directions: int,
                     workers: int = 1) -> RelaxationSummary:
    """Tightness and variational-inequality checks on ``count`` random instances.

    Instance i uses child i of ``SeedSequence(seed)``, so the result does
    not depend on ``workers``.
    """
    if count < 1:
        raise InputError(f"instance count must be >= 1, got {count}")
    if not 1 <= max_atoms <= BRUTE_FORCE_MAX_ATOMS:
        raise EnumerationLimitError(f"max_atoms must lie in 1..{BRUTE_FORCE_MAX_ATOMS}, got {max_atoms}")
    children = np.random.SeedSequence(seed).spawn(count)
    args = [(i, child, max_atoms, directions) for i, child in enumerate(children)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            checks = list(pool.map(lambda a: _check_instance(*a), args))
    else:
        checks = [_check_instance(*a) for a in args]
    summary = RelaxationSummary(seed=seed, directions=directions, checks=checks)
    logger.info(f"relaxation batch: {summary.headline()}")
    return summary


def verify_pair(pair: HypothesisPair, cost: CostModel, grid: Optional[Grid], seed: int,
                directions: int) -> InstanceCheck:
    """Run the same checks on a discretized pair; brute force only when n is small enough."""
    inst = discretize(pair, grid)
    rng = np.random.default_rng(seed)
    solution = relaxed_minimum(inst, cost)
    brute_value = None
    if inst.n <= BRUTE_FORCE_MAX_ATOMS:
        _, brute_value = brute_force_indicator_minimum(inst, cost)
    else:
        logger.info(f"{inst.n} atoms: skipping brute force, checking directions only")
    tested = random_directions(rng, inst.n, directions) + vertex_directions(solution.allocation)
    return InstanceCheck(
        index=0,
        n=inst.n,
        c0=cost.c0,
        c1=cost.c1,
        relaxed_value=solution.value,
        brute_force_value=brute_value,
        min_derivative=min_directional_derivative(inst, cost, solution.allocation, tested),
    )
