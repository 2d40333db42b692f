"""Cost comparison table for the Gaussian mean example: NP size 0.05 against cost-optimal tests."""
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

from app.config.constants import COST_TABLE_FILE
from app.design.testdesign import compare_costs
from app.utils.logging_utils import setup_logger
from app.utils.scenario_loader import load_scenario

logger = setup_logger(__name__)

FULL_PRECISION = "full-precision"
PRINTED_CONSTANTS = "printed-constants"


@dataclass(frozen=True)
class TableRow:
    mode: str
    label: str
    c0: float
    np_alpha: float
    np_beta: float
    np_cost: float
    alpha_star: float
    beta_star: float
    optimal_cost: float
    printed_np_cost: float
    printed_optimal_cost: float

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def round_significant(value: float, digits: int) -> float:
    if value == 0 or not math.isfinite(value):
        return value
    return round(value, digits - 1 - int(math.floor(math.log10(abs(value)))))


def load_table_spec(path: Union[str, Path] = COST_TABLE_FILE) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def reproduce_table(printed_constants: bool = False,
                    path: Union[str, Path] = COST_TABLE_FILE) -> List[TableRow]:
    """Recompute every row; with ``printed_constants`` use the printed constants and rounded rates."""
    spec = load_table_spec(path)
    pair = load_scenario(spec["scenario"]).to_pair()
    c1 = float(spec["c1"])
    np_size = float(spec["np_size"])
    printed_rows = spec["rows"]
    comparisons = compare_costs(pair, [math.exp(r["c0_exponent"]) for r in printed_rows], c1, np_size)

    digits = spec["rounding"]["rate_significant_digits"]
    beta_decimals = spec["rounding"]["np_beta_decimals"]
    rows = []
    for printed, comp in zip(printed_rows, comparisons):
        if printed_constants:
            c0 = float(printed["printed_c0"])
            np_alpha = np_size
            np_beta = round(comp.np_rates.beta, beta_decimals)
            alpha_star = round_significant(comp.optimal_rates.alpha, digits)
            beta_star = round_significant(comp.optimal_rates.beta, digits)
        else:
            c0 = comp.cost.c0
            np_alpha, np_beta = comp.np_rates.alpha, comp.np_rates.beta
            alpha_star, beta_star = comp.optimal_rates.alpha, comp.optimal_rates.beta
        rows.append(TableRow(
            mode=PRINTED_CONSTANTS if printed_constants else FULL_PRECISION,
            label=printed["label"],
            c0=c0,
            np_alpha=np_alpha,
            np_beta=np_beta,
            np_cost=c0 * np_alpha + c1 * np_beta,
            alpha_star=alpha_star,
            beta_star=beta_star,
            optimal_cost=c0 * alpha_star + c1 * beta_star,
            printed_np_cost=float(printed["printed_np_cost"]),
            printed_optimal_cost=float(printed["printed_optimal_cost"]),
        ))
    np_dev, opt_dev = max_deviation(rows)
    logger.info(f"max deviation from printed values: NP {np_dev:.3g}, optimal {opt_dev:.3g}")
    return rows


def max_deviation(rows: List[TableRow]) -> Tuple[float, float]:
    """Largest |recomputed - printed| for the NP cost and for the optimal cost."""
    np_dev = max(abs(r.np_cost - r.printed_np_cost) for r in rows)
    opt_dev = max(abs(r.optimal_cost - r.printed_optimal_cost) for r in rows)
    return np_dev, opt_dev


def reproduce_both(path: Union[str, Path] = COST_TABLE_FILE) -> List[TableRow]:
    """Full-precision rows followed by the printed-constant rows of the same table."""
    return reproduce_table(False, path) + reproduce_table(True, path)
