"""Run every reproducibility check in sequence and print a summary."""
import math
import sys
from typing import Callable, Dict, List, Optional, Tuple

from app.config.constants import (
    DATA_DIR,
    DEFAULT_DIRECTIONS,
    DEFAULT_INSTANCES,
    DEFAULT_MAX_ATOMS,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    MAX_WORKERS,
)
from app.design.cost_table import max_deviation, reproduce_both
from app.design.testdesign import CostModel, cost_optimal_test, error_rates, neyman_pearson_test
from app.utils.logging_utils import setup_logger
from app.utils.report_writer import write_csv
from app.utils.scenario_loader import load_scenario
from app.verification.montecarlo import compare_policies
from app.verification.relaxation import verify_instances

logger = setup_logger(__name__)

RESULTS_DIR = DATA_DIR / "checks"
TABLE_TOLERANCE = 2e-3


def check_cost_table(trials: int, seed: int) -> Tuple[bool, str]:
    rows = reproduce_both()
    write_csv([r.as_dict() for r in rows], RESULTS_DIR / "cost_table.csv")
    np_dev, opt_dev = max_deviation(rows)
    ok = np_dev <= TABLE_TOLERANCE and opt_dev <= TABLE_TOLERANCE
    return ok, f"max deviation NP {np_dev:.2g}, optimal {opt_dev:.2g}"


def check_relaxation(trials: int, seed: int) -> Tuple[bool, str]:
    summary = verify_instances(DEFAULT_INSTANCES, DEFAULT_MAX_ATOMS, seed, DEFAULT_DIRECTIONS)
    return summary.all_ok, summary.headline()


def check_gaussian_simulation(trials: int, seed: int) -> Tuple[bool, str]:
    scenario = load_scenario("gaussian_mean")
    pair = scenario.to_pair()
    cost = CostModel(math.e ** 2, 1.0)
    comparison = compare_policies(pair, cost, scenario.np_size, trials, seed, workers=MAX_WORKERS)
    np_rates = error_rates(comparison.np_test, pair)
    opt_rates = error_rates(comparison.optimal_test, pair)
    ok = (comparison.np_report.covers(np_rates.alpha, np_rates.beta)
          and comparison.optimal_report.covers(opt_rates.alpha, opt_rates.beta)
          and comparison.difference > 0)
    return ok, (f"cost difference {comparison.difference:.4f} "
                f"+/- {comparison.difference_ci_halfwidth:.4f}")


def check_poisson_randomization(trials: int, seed: int) -> Tuple[bool, str]:
    pair = load_scenario("poisson_rates").to_pair()
    test = neyman_pearson_test(pair, 0.5)
    rates = error_rates(test, pair)
    ok = abs(rates.alpha - 0.5) <= 1e-12 and 0 < test.boundary_randomization < 1
    return ok, f"gamma {test.boundary_randomization:.4f}, alpha {rates.alpha:.6f}"


def check_cost_scaling(trials: int, seed: int) -> Tuple[bool, str]:
    pair = load_scenario("gaussian_mean").to_pair()
    base = cost_optimal_test(pair, CostModel(3.0, 1.5))
    scaled = cost_optimal_test(pair, CostModel(3.0 * 7.5, 1.5 * 7.5))
    gap = abs(base.llr_threshold - scaled.llr_threshold)
    return gap <= 1e-12, f"threshold gap {gap:.1g}"


CHECKS: List[Tuple[str, Callable[[int, int], Tuple[bool, str]]]] = [
    ("Cost table", check_cost_table),
    ("Relaxation tightness", check_relaxation),
    ("Gaussian Monte Carlo", check_gaussian_simulation),
    ("Poisson NP randomization", check_poisson_randomization),
    ("Cost-ratio invariance", check_cost_scaling),
]


def run_checks(trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED) -> List[Dict[str, object]]:
    """Run all checks sequentially; a failing check does not stop the others."""
    print("\n" + "=" * 60)
    print("🚀 Running all checks")
    print("=" * 60 + "\n")

    results = []
    for name, check in CHECKS:
        print(f"\n📋 {name}")
        print("-" * 60)
        try:
            ok, detail = check(trials, seed)
            print(f"{'✅' if ok else '❌'} {name}: {detail}")
            results.append({"check": name, "ok": ok, "detail": detail})
        except Exception as e:
            print(f"❌ {name}: Error - {e}")
            logger.error(f"Error in check {name}: {e}", exc_info=True)
            results.append({"check": name, "ok": False, "detail": str(e)})
    return results


def main(trials: Optional[int] = None, seed: Optional[int] = None) -> bool:
    trials = trials or DEFAULT_TRIALS
    seed = DEFAULT_SEED if seed is None else seed
    results = run_checks(trials, seed)
    write_csv(results, RESULTS_DIR / "summary.csv")

    passed = sum(1 for r in results if r["ok"])
    print("\n" + "=" * 60)
    print("📈 SUMMARY")
    print("=" * 60)
    print(f"   Checks run: {len(results)}")
    print(f"   Passed: {passed}")
    print(f"   Trials: {trials}, seed: {seed}")
    print(f"   Results: {RESULTS_DIR}")
    print("=" * 60 + "\n")
    return passed == len(results)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
