"""Scenario files: JSON validated with pydantic, errors anchored to file lines."""
import json
import math
import re
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, TypeAdapter, ValidationError, field_validator

from app.config.constants import SCENARIO_DIR
from app.design.likelihood import HypothesisPair
from app.design.testdesign import CostModel
from app.errors import HypothesisDesignError, InputError, ScenarioParseError
from app.models.distributions import FAMILIES, DensityModel, model_from_spec
from app.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

_EXP_PATTERN = re.compile(r"^\s*(?:e\s*\^\s*(?P<pow>[-+]?[\d.]+)|exp\s*\(\s*(?P<arg>[-+]?[\d.]+)\s*\)|(?P<e>e))\s*$")


def parse_cost_value(value: Union[str, float, int]) -> float:
    """Read a cost written as a number, ``e``, ``e^k`` or ``exp(k)``."""
    if isinstance(value, bool):
        raise InputError(f"cost {value!r} is not a number")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    match = _EXP_PATTERN.match(text)
    if match:
        if match.group("e"):
            return math.e
        return math.exp(float(match.group("pow") or match.group("arg")))
    try:
        return float(text)
    except ValueError:
        raise InputError(f"cost {value!r} is not a number, 'e', 'e^k' or 'exp(k)'") from None


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    def to_model(self) -> DensityModel:
        return model_from_spec(**self.model_dump())


class GaussianSpec(_Spec):
    family: Literal["gaussian"]
    mean: float
    variance: float = Field(gt=0)


class ExponentialSpec(_Spec):
    family: Literal["exponential"]
    rate: float = Field(gt=0)


class PoissonSpec(_Spec):
    family: Literal["poisson"]
    rate: float = Field(gt=0)


class BernoulliSpec(_Spec):
    family: Literal["bernoulli"]
    p: float = Field(gt=0, lt=1)


class BinomialSpec(_Spec):
    family: Literal["binomial"]
    trials: PositiveInt
    p: float = Field(gt=0, lt=1)


class TabulatedSpec(_Spec):
    family: Literal["tabulated"]
    support: List[int]
    masses: List[float]


ModelSpec = Annotated[
    Union[GaussianSpec, ExponentialSpec, PoissonSpec, BernoulliSpec, BinomialSpec, TabulatedSpec],
    Field(discriminator="family"),
]
_MODEL_SPEC = TypeAdapter(ModelSpec)


class CostSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    c0: float = Field(gt=0)
    c1: float = Field(gt=0)

    @field_validator("c0", "c1", mode="before")
    @classmethod
    def _expand_constants(cls, value):
        if isinstance(value, str):
            try:
                return parse_cost_value(value)
            except InputError as e:
                raise ValueError(str(e)) from None
        return value


class Scenario(BaseModel):
    """A hypothesis pair, its costs and an optional Neyman-Pearson size."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: Optional[str] = None
    p0: ModelSpec
    p1: ModelSpec
    sample_size: PositiveInt = 1
    costs: CostSpec
    np_size: Optional[float] = Field(default=None, gt=0, lt=1)

    def to_pair(self) -> HypothesisPair:
        return HypothesisPair(self.p0.to_model(), self.p1.to_model(), self.sample_size)

    def to_cost(self) -> CostModel:
        return CostModel(self.costs.c0, self.costs.c1)

    def with_overrides(self, c0: Optional[float] = None, c1: Optional[float] = None,
                       np_size: Optional[float] = None) -> "Scenario":
        costs = self.costs
        if c0 is not None or c1 is not None:
            costs = CostSpec(c0=c0 if c0 is not None else costs.c0,
                             c1=c1 if c1 is not None else costs.c1)
        data = self.model_dump()
        data["costs"] = costs.model_dump()
        if np_size is not None:
            data["np_size"] = np_size
        return Scenario.model_validate(data)

    @classmethod
    def from_models(cls, pair: HypothesisPair, cost: CostModel, np_size: Optional[float] = None,
                    name: Optional[str] = None) -> "Scenario":
        return cls(
            name=name,
            p0=_MODEL_SPEC.validate_python(pair.p0.to_spec()),
            p1=_MODEL_SPEC.validate_python(pair.p1.to_spec()),
            sample_size=pair.sample_size,
            costs=CostSpec(c0=cost.c0, c1=cost.c1),
            np_size=np_size,
        )


def _line_of(text: str, loc: Tuple[Any, ...]) -> Optional[int]:
    """1-based line of the deepest key of ``loc`` found in order in ``text``."""
    pos, line = 0, None
    for key in loc:
        if not isinstance(key, str):
            continue
        match = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if match is None:
            continue
        pos = match.end()
        line = text.count("\n", 0, match.start()) + 1
    return line


def _field_name(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(k) for k in loc if k not in FAMILIES) or "<root>"


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario JSON; every failure names a line and a field."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(e.msg, path=source, line=e.lineno) from None

    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = tuple(first["loc"])
        raise ScenarioParseError(first["msg"], path=source, line=_line_of(text, loc),
                                 field=_field_name(loc)) from None

    models = {}
    for field in ("p0", "p1"):
        try:
            models[field] = getattr(scenario, field).to_model()
        except HypothesisDesignError as e:
            raise ScenarioParseError(str(e), path=source, line=_line_of(text, (field,)), field=field) from None
    try:
        HypothesisPair(models["p0"], models["p1"], scenario.sample_size)
    except HypothesisDesignError as e:
        raise ScenarioParseError(str(e), path=source, line=_line_of(text, ("p1",)), field="p1") from None
    return scenario


def resolve_scenario_path(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = SCENARIO_DIR / f"{name_or_path}.json"
    if bundled.exists():
        return bundled
    raise ScenarioParseError(f"no scenario file or bundled scenario named {name_or_path!r}",
                             path=name_or_path)


def load_scenario(name_or_path: str) -> Scenario:
    path = resolve_scenario_path(name_or_path)
    logger.info(f"loading scenario {path}")
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(path))


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(exclude_none=True), indent=2) + "\n"


def write_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dump_scenario(scenario), encoding="utf-8", newline="\n")
    return path
