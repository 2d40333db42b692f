"""Command-line interface: design, np, compare, simulate, verify-relaxation, reproduce-table."""
import argparse
import sys
from typing import Dict, List, Optional

from app.config.constants import (
    DEFAULT_DIRECTIONS,
    DEFAULT_INSTANCES,
    DEFAULT_MAX_ATOMS,
    DEFAULT_NP_SIZE,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    MAX_WORKERS,
    OUTPUT_DIGITS,
)
from app.design.cost_table import (
    FULL_PRECISION,
    PRINTED_CONSTANTS,
    max_deviation,
    reproduce_both,
    reproduce_table,
)
from app.design.likelihood import HypothesisPair, linear_reduction, mean_threshold
from app.design.testdesign import (
    ThresholdTest,
    compare_costs,
    cost_optimal_test,
    error_rates,
    implied_cost_ratio,
    neyman_pearson_test,
)
from app.errors import HypothesisDesignError, InputError, NotAnalyticallyEvaluableError
from app.models.distributions import Gaussian
from app.utils.logging_utils import set_level, setup_logger
from app.utils.report_writer import config_lines, describe_model, format_number, render_table, write_csv
from app.utils.scenario_loader import Scenario, load_scenario, parse_cost_value, write_scenario
from app.verification.montecarlo import compare_policies, estimate_error_rates
from app.verification.relaxation import Grid, verify_instances, verify_pair

logger = setup_logger(__name__)

DEFAULT_SCENARIO = "gaussian_mean"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_NOT_ANALYTIC = 3


# --- helpers ----------------------------------------------------------------

def _scenario(args, default: Optional[str] = DEFAULT_SCENARIO) -> Optional[Scenario]:
    name = args.scenario or default
    if name is None:
        return None
    scenario = load_scenario(name)
    c0 = _cost_flag(args.c0, "--c0")
    c1 = _cost_flag(args.c1, "--c1")
    if c0 is not None or c1 is not None or args.size is not None:
        try:
            scenario = scenario.with_overrides(c0=c0, c1=c1, np_size=args.size)
        except ValueError as e:
            raise InputError(f"override rejected: {e}") from None
    if args.write_scenario:
        write_scenario(scenario, args.write_scenario)
    return scenario


def _cost_flag(value: Optional[str], flag: str) -> Optional[float]:
    if value is None:
        return None
    try:
        cost = parse_cost_value(value)
    except InputError as e:
        raise InputError(f"{flag}: {e}") from None
    if not cost > 0:
        raise InputError(f"{flag}: cost must be > 0, got {value!r}")
    return cost


def _np_size(args, scenario: Scenario) -> float:
    if args.size is not None:
        return args.size
    return scenario.np_size if scenario.np_size is not None else DEFAULT_NP_SIZE


def _scenario_config(command: str, scenario: Scenario, args) -> Dict[str, object]:
    return {
        "command": command,
        "scenario": args.scenario or DEFAULT_SCENARIO,
        "p0": describe_model(scenario.p0.model_dump()),
        "p1": describe_model(scenario.p1.model_dump()),
        "sample_size": scenario.sample_size,
        "c0": scenario.costs.c0,
        "c1": scenario.costs.c1,
        "seed": args.seed,
    }


def _cutoff_columns(pair: HypothesisPair, test: ThresholdTest) -> Dict[str, object]:
    """Threshold expressed on the sufficient statistic, when there is one."""
    t = test.llr_threshold
    p0, p1 = pair.p0, pair.p1
    if isinstance(p0, Gaussian) and isinstance(p1, Gaussian) \
            and p0.variance == p1.variance and p0.mean < p1.mean:
        return {"mean_cutoff": mean_threshold(pair, t)}
    reduction = linear_reduction(pair)
    if reduction is None:
        return {}
    cutoff = reduction.statistic_threshold(t)
    op = ">=" if reduction.slope > 0 else "<="
    return {
        "statistic": reduction.statistic,
        "statistic_cutoff": cutoff,
        "reject_when": f"{reduction.statistic} {op} {format_number(cutoff)}",
    }


def _emit(config: Dict[str, object], rows: List[Dict[str, object]], args,
          footer: Optional[List[str]] = None) -> None:
    digits = args.digits
    for line in config_lines(config, digits):
        print(line)
    print(render_table(rows, digits))
    for line in footer or []:
        print(line)
    if args.csv:
        path = write_csv(rows, args.csv, digits)
        logger.info(f"wrote {path}")


# --- commands ---------------------------------------------------------------

def cmd_design(args) -> int:
    scenario = _scenario(args)
    pair, cost = scenario.to_pair(), scenario.to_cost()
    test = cost_optimal_test(pair, cost)
    rates = error_rates(test, pair)
    row = {
        "c0": cost.c0,
        "c1": cost.c1,
        "llr_threshold": test.llr_threshold,
        **_cutoff_columns(pair, test),
        "alpha": rates.alpha,
        "beta": rates.beta,
        "power": rates.power,
        "expected_cost": cost.c0 * rates.alpha + cost.c1 * rates.beta,
    }
    _emit(_scenario_config("design", scenario, args), [row], args)
    return EXIT_OK


def cmd_np(args) -> int:
    scenario = _scenario(args)
    pair = scenario.to_pair()
    size = _np_size(args, scenario)
    test = neyman_pearson_test(pair, size)
    rates = error_rates(test, pair)
    row = {
        "size": size,
        "llr_threshold": test.llr_threshold,
        "randomization": test.boundary_randomization,
        **_cutoff_columns(pair, test),
        "alpha": rates.alpha,
        "beta": rates.beta,
        "power": rates.power,
        "implied_cost_ratio": implied_cost_ratio(test),
    }
    config = _scenario_config("np", scenario, args)
    config["np_size"] = size
    _emit(config, [row], args)
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _scenario(args)
    pair, cost = scenario.to_pair(), scenario.to_cost()
    size = _np_size(args, scenario)
    rows = []
    for comp in compare_costs(pair, [cost.c0], cost.c1, size):
        rows.append({
            "c0": comp.cost.c0,
            "c1": comp.cost.c1,
            "np_alpha": comp.np_rates.alpha,
            "np_beta": comp.np_rates.beta,
            "np_cost": comp.np_cost,
            "alpha_star": comp.optimal_rates.alpha,
            "beta_star": comp.optimal_rates.beta,
            "optimal_cost": comp.optimal_cost,
            "saving": comp.saving,
        })
    config = _scenario_config("compare", scenario, args)
    config["np_size"] = size
    _emit(config, rows, args)
    return EXIT_OK


def _simulation_row(policy: str, test: ThresholdTest, report, pair: HypothesisPair) -> Dict[str, object]:
    try:
        analytic = error_rates(test, pair)
    except NotAnalyticallyEvaluableError:
        analytic = None
    return {
        "policy": policy,
        "llr_threshold": test.llr_threshold,
        "randomization": test.boundary_randomization,
        "alpha_hat": report.alpha_hat,
        "alpha_ci": report.alpha_ci_halfwidth,
        "alpha": analytic.alpha if analytic else None,
        "beta_hat": report.beta_hat,
        "beta_ci": report.beta_ci_halfwidth,
        "beta": analytic.beta if analytic else None,
        "cost_hat": report.cost_hat,
    }


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    pair, cost = scenario.to_pair(), scenario.to_cost()
    size = _np_size(args, scenario)
    config = _scenario_config("simulate", scenario, args)
    config.update({"np_size": size, "trials": args.trials, "seed": args.seed})

    try:
        comparison = compare_policies(pair, cost, size, args.trials, args.seed, workers=args.workers)
    except NotAnalyticallyEvaluableError as e:
        # the NP test cannot be calibrated; simulate the cost-optimal test alone
        logger.warning(f"{e}")
        test = cost_optimal_test(pair, cost)
        report = estimate_error_rates(test, pair, args.trials, args.seed, cost=cost, workers=args.workers)
        _emit(config, [_simulation_row("cost-optimal", test, report, pair)], args,
              ["# neyman-pearson: not calibrated, no analytic law of ln L"])
        return EXIT_OK

    rows = [_simulation_row("neyman-pearson", comparison.np_test, comparison.np_report, pair),
            _simulation_row("cost-optimal", comparison.optimal_test, comparison.optimal_report, pair)]
    footer = [
        f"# difference (np - optimal): {format_number(comparison.difference, args.digits)} "
        f"+/- {format_number(comparison.difference_ci_halfwidth, args.digits)}",
        f"# significant: {format_number(comparison.significant)}",
    ]
    _emit(config, rows, args, footer)
    return EXIT_OK


def cmd_verify_relaxation(args) -> int:
    scenario = _scenario(args, default=None)
    if scenario is not None:
        grid = Grid.parse(args.grid) if args.grid else None
        checks = [verify_pair(scenario.to_pair(), scenario.to_cost(), grid, args.seed, args.directions)]
        config = _scenario_config("verify-relaxation", scenario, args)
        config.update({"grid": args.grid or "", "seed": args.seed, "directions": args.directions})
        ok = all(c.variational_inequality_holds and (c.brute_force_value is None or c.tight)
                 for c in checks)
        headline = "variational inequality holds" if ok else "variational inequality violated"
    else:
        summary = verify_instances(args.instances, args.max_atoms, args.seed, args.directions,
                                   workers=args.workers)
        checks = summary.checks
        config = {"command": "verify-relaxation", "instances": args.instances,
                  "max_atoms": args.max_atoms, "directions": args.directions, "seed": args.seed}
        ok = summary.all_ok
        headline = summary.headline()

    rows = [{
        "instance": c.index,
        "n": c.n,
        "c0": c.c0,
        "c1": c.c1,
        "relaxed_value": c.relaxed_value,
        "brute_force_value": c.brute_force_value,
        "gap": c.gap,
        "min_derivative": c.min_derivative,
        "tight": c.tight,
    } for c in checks]
    _emit(config, rows, args, [f"# summary: {headline}"])
    return EXIT_OK if ok else EXIT_FAILED


def cmd_reproduce_table(args) -> int:
    if args.printed_constants:
        rows, mode = reproduce_table(printed_constants=True), PRINTED_CONSTANTS
    else:
        rows, mode = reproduce_both(), f"{FULL_PRECISION},{PRINTED_CONSTANTS}"
    config = {"command": "reproduce-table", "mode": mode, "seed": args.seed}
    footer = []
    for row_mode in dict.fromkeys(r.mode for r in rows):
        np_dev, opt_dev = max_deviation([r for r in rows if r.mode == row_mode])
        footer += [f"# {row_mode} max |np_cost - printed|: {format_number(np_dev, 3)}",
                   f"# {row_mode} max |optimal_cost - printed|: {format_number(opt_dev, 3)}"]
    _emit(config, [r.as_dict() for r in rows], args, footer)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON path or bundled name (gaussian_mean, poisson_rates)")
    common.add_argument("--c0", help="cost of rejecting H0 when true (number, e, e^k, exp(k))")
    common.add_argument("--c1", help="cost of rejecting H1 when true")
    common.add_argument("--size", type=float, help="Neyman-Pearson test size")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--csv", help="also write the result table to this CSV file")
    common.add_argument("--paper-rounding", dest="printed_constants", action="store_true",
                        help="use the printed constants and rounded rates of the cost table")
    common.add_argument("--digits", type=int, default=OUTPUT_DIGITS, help="significant digits in output")
    common.add_argument("--write-scenario", help="write the resolved scenario JSON to this path")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Design cost-optimal tests between simple hypotheses and compare them "
                    "with Neyman-Pearson tests.")
    common = _common_options()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common], help="cost-optimal test, its error rates and cost")
    p.set_defaults(handler=cmd_design)

    p = sub.add_parser("np", parents=[common], help="Neyman-Pearson test of a given size")
    p.set_defaults(handler=cmd_np)

    p = sub.add_parser("compare", parents=[common], help="expected cost: NP test against cost-optimal test")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo error rates and paired cost comparison")
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--workers", type=int, default=MAX_WORKERS)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("verify-relaxation", parents=[common],
                       help="relaxation tightness and directional-derivative checks")
    p.add_argument("--grid", help="lo:hi:n grid for continuous scenarios")
    p.add_argument("--instances", type=int, default=DEFAULT_INSTANCES)
    p.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
    p.add_argument("--directions", type=int, default=DEFAULT_DIRECTIONS)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_verify_relaxation)

    p = sub.add_parser("reproduce-table", parents=[common], help="cost comparison table of the Gaussian example")
    p.set_defaults(handler=cmd_reproduce_table)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.handler(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        logger.debug("input error", exc_info=True)
        return EXIT_INPUT
    except NotAnalyticallyEvaluableError as e:
        print(f"error: {e}", file=sys.stderr)
        print("hint: run `simulate` for a Monte Carlo estimate", file=sys.stderr)
        return EXIT_NOT_ANALYTIC
    except HypothesisDesignError as e:
        print(f"error: {e}", file=sys.stderr)
        logger.debug("design error", exc_info=True)
        return EXIT_FAILED
