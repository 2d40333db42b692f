"""Distribution families evaluated as densities against a base measure.

Continuous families (gaussian, exponential) are densities with respect to
Lebesgue measure on the reals; discrete families (poisson, bernoulli,
binomial, tabulated) are mass functions with respect to counting measure on
the integers. Every model answers the same questions (log density, cdf,
quantile, sampling) so the rest of the package never branches on the base
measure except where the mathematics does.
"""
import math
import numbers
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, Tuple, Type

import numpy as np
from scipy import special, stats

from app.config.constants import MASS_TOLERANCE, POISSON_TAIL_MASS, QUANTILE_TOLERANCE
from app.errors import InputError, UnsupportedReductionError
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)


class BaseMeasure(str, Enum):
    LEBESGUE = "lebesgue-on-reals"
    COUNTING = "counting-on-integers"


@dataclass(frozen=True)
class DensityModel(ABC):
    """A named family with parameters, evaluable as a density against its base measure."""

    family: ClassVar[str] = ""
    base: ClassVar[BaseMeasure] = BaseMeasure.LEBESGUE

    @property
    def is_discrete(self) -> bool:
        return self.base is BaseMeasure.COUNTING

    @abstractmethod
    def law(self):
        """Return the equivalent frozen ``scipy.stats`` distribution."""

    @abstractmethod
    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized ln p(x); values must already be type-compatible."""

    @abstractmethod
    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw i.i.d. values of the given shape from a caller-owned generator."""

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        """Parameters by name, as written in scenario files."""

    def to_spec(self) -> Dict[str, Any]:
        return {"family": self.family, **self.params()}

    def check_observation(self, x) -> float:
        """Validate a single observation against the base measure and return it as a number."""
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Real):
            raise InputError(f"{self.family}: observation {x!r} is not a real number")
        value = float(x)
        if math.isnan(value):
            raise InputError(f"{self.family}: observation is NaN")
        if self.is_discrete and not value.is_integer():
            raise InputError(f"{self.family}: observation {x!r} is not an integer "
                             f"(counting measure on the integers)")
        return value

    def check_observations(self, xs) -> np.ndarray:
        arr = np.asarray(xs)
        if arr.dtype == bool or not (np.issubdtype(arr.dtype, np.integer)
                                     or np.issubdtype(arr.dtype, np.floating)):
            raise InputError(f"{self.family}: observations must be numeric, got dtype {arr.dtype}")
        arr = arr.astype(float)
        if np.isnan(arr).any():
            raise InputError(f"{self.family}: observations contain NaN")
        if self.is_discrete and not np.all(np.isinf(arr) | (arr == np.floor(arr))):
            raise InputError(f"{self.family}: observations must be integers")
        return arr

    def log_density(self, x) -> float:
        value = self.check_observation(x)
        return float(self.log_density_array(np.array([value]))[0])

    def cdf(self, x) -> float:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Real):
            raise InputError(f"{self.family}: cdf argument {x!r} is not a real number")
        return float(self.law().cdf(float(x)))

    def sf(self, x) -> float:
        """P(X > x)."""
        return float(self.law().sf(float(x)))

    def quantile(self, q: float) -> float:
        if not (0.0 < q < 1.0):
            raise InputError(f"{self.family}: quantile level must lie in (0, 1), got {q!r}")
        if self.is_discrete:
            return self._discrete_quantile(q)
        return self._continuous_quantile(q)

    def _initial_quantile(self, q: float) -> float:
        return float(self.law().ppf(q))

    def _continuous_quantile(self, q: float) -> float:
        x = self._initial_quantile(q)
        # Newton polish on the starting point
        for _ in range(3):
            err = self.cdf(x) - q
            if abs(err) <= QUANTILE_TOLERANCE:
                break
            dens = math.exp(float(self.log_density_array(np.array([x]))[0]))
            if dens <= 0.0 or not math.isfinite(dens):
                break
            x -= err / dens
        return x

    def _discrete_quantile(self, q: float) -> float:
        # smallest support point with cdf >= q
        lower = self.support_lower()
        k = float(self.law().ppf(q))
        if not math.isfinite(k):
            k = lower
        while k > lower and self.cdf(k - 1) >= q:
            k -= 1
        while self.cdf(k) < q:
            k += 1
        return k

    def support_lower(self) -> float:
        return -math.inf

    def support_atoms(self, tail_mass: float) -> np.ndarray:
        """Integer atoms covering at least ``1 - tail_mass`` of the mass."""
        raise InputError(f"{self.family} is not a discrete family")

    def support_interval(self) -> Tuple[float, float]:
        return -math.inf, math.inf

    def log_density_polynomial(self) -> Tuple[float, float, float]:
        """(a, b, c) with ln p(x) = a x^2 + b x + c on the support interval."""
        raise UnsupportedReductionError(f"{self.family} has no polynomial log density")

    def same_law(self, other: "DensityModel") -> bool:
        """True when both models define the same distribution, whatever their family."""
        if self == other:
            return True
        if self.base is not other.base:
            return False
        if not self.is_discrete:
            # continuous families are identified by their parameters
            return False
        atoms = np.union1d(self.support_atoms(POISSON_TAIL_MASS),
                           other.support_atoms(POISSON_TAIL_MASS)).astype(float)
        mass_self = np.exp(self.log_density_array(atoms))
        mass_other = np.exp(other.log_density_array(atoms))
        return bool(np.allclose(mass_self, mass_other, rtol=0.0, atol=MASS_TOLERANCE))


@dataclass(frozen=True)
class Gaussian(DensityModel):
    family: ClassVar[str] = "gaussian"
    base: ClassVar[BaseMeasure] = BaseMeasure.LEBESGUE

    mean: float
    variance: float

    def __post_init__(self):
        _require_finite(self.family, "mean", self.mean)
        _require_positive(self.family, "variance", self.variance)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def law(self):
        return stats.norm(loc=self.mean, scale=self.std)

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return -0.5 * math.log(2.0 * math.pi * self.variance) - (xs - self.mean) ** 2 / (2.0 * self.variance)

    def cdf(self, x) -> float:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Real):
            raise InputError(f"{self.family}: cdf argument {x!r} is not a real number")
        # ndtr switches to erfc in the tails, good to ~1e-16 absolute
        return float(special.ndtr((float(x) - self.mean) / self.std))

    def sf(self, x) -> float:
        return float(special.ndtr((self.mean - float(x)) / self.std))

    def _initial_quantile(self, q: float) -> float:
        return self.mean + self.std * float(special.ndtri(q))

    def log_density_polynomial(self) -> Tuple[float, float, float]:
        v = self.variance
        return (-0.5 / v, self.mean / v,
                -self.mean ** 2 / (2.0 * v) - 0.5 * math.log(2.0 * math.pi * v))

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mean, self.std, size=size)

    def params(self) -> Dict[str, Any]:
        return {"mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class Exponential(DensityModel):
    family: ClassVar[str] = "exponential"
    base: ClassVar[BaseMeasure] = BaseMeasure.LEBESGUE

    rate: float

    def __post_init__(self):
        _require_positive(self.family, "rate", self.rate)

    def law(self):
        return stats.expon(scale=1.0 / self.rate)

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        with np.errstate(invalid="ignore"):
            out = math.log(self.rate) - self.rate * xs
        return np.where(xs >= 0.0, out, -np.inf)

    def _initial_quantile(self, q: float) -> float:
        return -math.log1p(-q) / self.rate

    def cdf(self, x) -> float:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Real):
            raise InputError(f"{self.family}: cdf argument {x!r} is not a real number")
        return float(-np.expm1(-self.rate * max(float(x), 0.0)))

    def support_lower(self) -> float:
        return 0.0

    def support_interval(self) -> Tuple[float, float]:
        return 0.0, math.inf

    def log_density_polynomial(self) -> Tuple[float, float, float]:
        return 0.0, -self.rate, math.log(self.rate)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, size=size)

    def params(self) -> Dict[str, Any]:
        return {"rate": self.rate}


@dataclass(frozen=True)
class Poisson(DensityModel):
    family: ClassVar[str] = "poisson"
    base: ClassVar[BaseMeasure] = BaseMeasure.COUNTING

    rate: float

    def __post_init__(self):
        _require_positive(self.family, "rate", self.rate)

    def law(self):
        return stats.poisson(self.rate)

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        return self.law().logpmf(np.asarray(xs, dtype=float))

    def support_lower(self) -> float:
        return 0.0

    def support_atoms(self, tail_mass: float) -> np.ndarray:
        law = self.law()
        k = int(law.isf(tail_mass))
        while law.sf(k) >= tail_mass:
            k += 1
        logger.info(f"poisson({self.rate}) truncated at k={k} (residual < {tail_mass:g})")
        return np.arange(0, k + 1)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.poisson(self.rate, size=size)

    def params(self) -> Dict[str, Any]:
        return {"rate": self.rate}


@dataclass(frozen=True)
class Bernoulli(DensityModel):
    family: ClassVar[str] = "bernoulli"
    base: ClassVar[BaseMeasure] = BaseMeasure.COUNTING

    p: float

    def __post_init__(self):
        _require_probability(self.family, "p", self.p)

    def law(self):
        return stats.bernoulli(self.p)

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        return self.law().logpmf(np.asarray(xs, dtype=float))

    def support_lower(self) -> float:
        return 0.0

    def support_atoms(self, tail_mass: float) -> np.ndarray:
        return np.arange(0, 2)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return (rng.random(size=size) < self.p).astype(np.int64)

    def params(self) -> Dict[str, Any]:
        return {"p": self.p}


@dataclass(frozen=True)
class Binomial(DensityModel):
    family: ClassVar[str] = "binomial"
    base: ClassVar[BaseMeasure] = BaseMeasure.COUNTING

    trials: int
    p: float

    def __post_init__(self):
        if isinstance(self.trials, bool) or not isinstance(self.trials, numbers.Integral) or self.trials < 1:
            raise InputError(f"{self.family}: trials must be a positive integer, got {self.trials!r}")
        _require_probability(self.family, "p", self.p)

    def law(self):
        return stats.binom(int(self.trials), self.p)

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        return self.law().logpmf(np.asarray(xs, dtype=float))

    def support_lower(self) -> float:
        return 0.0

    def support_atoms(self, tail_mass: float) -> np.ndarray:
        return np.arange(0, int(self.trials) + 1)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.binomial(int(self.trials), self.p, size=size)

    def params(self) -> Dict[str, Any]:
        return {"trials": int(self.trials), "p": self.p}


@dataclass(frozen=True)
class Tabulated(DensityModel):
    """Finite distribution on integer atoms; atoms are stored sorted."""

    family: ClassVar[str] = "tabulated"
    base: ClassVar[BaseMeasure] = BaseMeasure.COUNTING

    support: Tuple[int, ...]
    masses: Tuple[float, ...]
    _cumulative: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        atoms = list(self.support)
        masses = [float(m) for m in self.masses]
        if not atoms:
            raise InputError("tabulated: support is empty")
        if len(atoms) != len(masses):
            raise InputError(f"tabulated: {len(atoms)} atoms but {len(masses)} masses")
        for a in atoms:
            if isinstance(a, bool) or not isinstance(a, numbers.Real) or not float(a).is_integer():
                raise InputError(f"tabulated: atom {a!r} is not an integer")
        atoms = [int(a) for a in atoms]
        if len(set(atoms)) != len(atoms):
            raise InputError("tabulated: atoms must be distinct")
        if any(m < 0.0 or not math.isfinite(m) for m in masses):
            raise InputError("tabulated: masses must be finite and nonnegative")
        total = math.fsum(masses)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise InputError(f"tabulated: masses sum to {total!r}, expected 1 within {MASS_TOLERANCE:g}")
        order = sorted(range(len(atoms)), key=lambda i: atoms[i])
        object.__setattr__(self, "support", tuple(atoms[i] for i in order))
        object.__setattr__(self, "masses", tuple(masses[i] for i in order))
        object.__setattr__(self, "_cumulative", np.cumsum(np.array(self.masses)))

    def law(self):
        return stats.rv_discrete(values=(np.array(self.support), np.array(self.masses)))

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        atoms = np.array(self.support, dtype=float)
        masses = np.array(self.masses)
        idx = np.clip(np.searchsorted(atoms, xs), 0, len(atoms) - 1)
        hit = atoms[idx] == xs
        with np.errstate(divide="ignore"):
            logs = np.log(masses[idx])
        return np.where(hit, logs, -np.inf)

    def cdf(self, x) -> float:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, numbers.Real):
            raise InputError(f"{self.family}: cdf argument {x!r} is not a real number")
        i = int(np.searchsorted(np.array(self.support, dtype=float), float(x), side="right"))
        if i == 0:
            return 0.0
        return float(min(self._cumulative[i - 1], 1.0))

    def sf(self, x) -> float:
        return 1.0 - self.cdf(x)

    def _discrete_quantile(self, q: float) -> float:
        i = int(np.searchsorted(self._cumulative, q, side="left"))
        return float(self.support[min(i, len(self.support) - 1)])

    def support_lower(self) -> float:
        return float(self.support[0])

    def support_atoms(self, tail_mass: float) -> np.ndarray:
        return np.array(self.support)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        masses = np.array(self.masses)
        return rng.choice(np.array(self.support), size=size, p=masses / masses.sum())

    def params(self) -> Dict[str, Any]:
        return {"support": list(self.support), "masses": list(self.masses)}


FAMILIES: Dict[str, Type[DensityModel]] = {
    cls.family: cls for cls in (Gaussian, Exponential, Poisson, Bernoulli, Binomial, Tabulated)
}


def _require_finite(family: str, name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
        raise InputError(f"{family}: {name} must be a finite real number, got {value!r}")


def _require_positive(family: str, name: str, value) -> None:
    _require_finite(family, name, value)
    if value <= 0:
        raise InputError(f"{family}: {name} must be > 0, got {value!r}")


def _require_probability(family: str, name: str, value) -> None:
    _require_finite(family, name, value)
    if not (0.0 < value < 1.0):
        raise InputError(f"{family}: {name} must lie in (0, 1), got {value!r}")


def model_from_spec(family: str, **params) -> DensityModel:
    """Build a model from its family name and parameters."""
    cls = FAMILIES.get(family)
    if cls is None:
        raise InputError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
    try:
        return cls(**params)
    except TypeError as e:
        raise InputError(f"{family}: bad parameters {sorted(params)}: {e}") from e


def log_density(model: DensityModel, x) -> float:
    return model.log_density(x)


def log_density_array(model: DensityModel, xs) -> np.ndarray:
    return model.log_density_array(model.check_observations(xs))


def cdf(model: DensityModel, x) -> float:
    return model.cdf(x)


def quantile(model: DensityModel, q: float) -> float:
    return model.quantile(q)


def draw(model: DensityModel, rng: np.random.Generator, shape) -> np.ndarray:
    return model.draw(rng, shape)


def support_atoms(model: DensityModel, tail_mass: float) -> np.ndarray:
    return model.support_atoms(tail_mass)


def sample(model: DensityModel, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. observations; identical seeds give identical arrays."""
    if isinstance(count, bool) or not isinstance(count, numbers.Integral) or count < 1:
        raise InputError(f"count must be a positive integer, got {count!r}")
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}")
    rng = np.random.default_rng(seed)
    return model.draw(rng, int(count))
