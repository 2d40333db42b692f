import math

import numpy as np
import pytest

from app.design.likelihood import HypothesisPair, mean_threshold
from app.design.testdesign import CostModel
from app.errors import DiscretizationError, EnumerationLimitError, InputError
from app.models.distributions import Gaussian, Poisson, Tabulated
from app.verification.relaxation import (
    FiniteInstance,
    Grid,
    RelaxedAllocation,
    brute_force_indicator_minimum,
    directional_derivative,
    discretize,
    min_directional_derivative,
    random_directions,
    random_instance,
    relaxed_minimum,
    relaxed_objective,
    verify_instances,
    verify_pair,
    vertex_directions,
)


def test_instance_validation():
    with pytest.raises(InputError):
        FiniteInstance(np.array([0.5, 0.6]), np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        FiniteInstance(np.array([1.2, -0.2]), np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        FiniteInstance(np.array([1.0]), np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        RelaxedAllocation(np.array([0.5, 1.5]))


def test_identical_vectors_have_zero_value():
    inst = FiniteInstance(np.array([0.25, 0.75]), np.array([0.25, 0.75]))
    solution = relaxed_minimum(inst, CostModel(2.0, 2.0))
    assert list(solution.allocation.f) == [1.0, 1.0]
    assert solution.value == 0.0
    assert solution.expected_cost(CostModel(2.0, 2.0)) == 2.0


@pytest.mark.parametrize("c0, c1", [(1.0, 1.0), (0.3, 5.0), (7.0, 0.2)])
def test_separable_instance(c0, c1):
    inst = FiniteInstance(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    cost = CostModel(c0, c1)
    solution = relaxed_minimum(inst, cost)
    assert list(solution.allocation.f) == [0.0, 1.0]
    assert solution.value == -c1
    assert solution.expected_cost(cost) == 0.0
    assert brute_force_indicator_minimum(inst, cost) == (frozenset({1}), -c1)


def test_single_atom_follows_ge_convention():
    inst = FiniteInstance(np.array([1.0]), np.array([1.0]))
    assert brute_force_indicator_minimum(inst, CostModel(1.0, 1.0))[0] == frozenset({0})
    assert brute_force_indicator_minimum(inst, CostModel(1.0, 2.0))[0] == frozenset({0})
    assert brute_force_indicator_minimum(inst, CostModel(2.0, 1.0))[0] == frozenset()


def test_relaxation_is_tight_on_random_instances():
    rng = np.random.default_rng(41)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        inst = random_instance(rng, n)
        cost = CostModel(float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        solution = relaxed_minimum(inst, cost)
        subset, value = brute_force_indicator_minimum(inst, cost)
        assert abs(solution.value - value) <= 1e-12
        assert subset == solution.allocation.support()
        assert solution.allocation.is_indicator()


def test_variational_inequality_holds():
    rng = np.random.default_rng(42)
    for _ in range(20):
        n = int(rng.integers(1, 13))
        inst = random_instance(rng, n)
        cost = CostModel(float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        f_star = relaxed_minimum(inst, cost).allocation
        directions = random_directions(rng, n, 1000) + vertex_directions(f_star)
        assert min_directional_derivative(inst, cost, f_star, directions) >= -1e-12
        assert directional_derivative(inst, cost, f_star, f_star) == 0.0


def test_suboptimal_allocation_has_descent_direction():
    rng = np.random.default_rng(43)
    checked = 0
    for _ in range(200):
        n = int(rng.integers(2, 10))
        inst = random_instance(rng, n)
        cost = CostModel(float(rng.uniform(0.1, 10)), float(rng.uniform(0.1, 10)))
        f = RelaxedAllocation(rng.random(n))
        if relaxed_objective(inst, cost, f) <= relaxed_minimum(inst, cost).value + 1e-9:
            continue
        assert min_directional_derivative(inst, cost, f, vertex_directions(f)) < 0.0
        checked += 1
    assert checked > 100


def test_all_zero_allocation_is_not_optimal():
    inst = FiniteInstance(np.array([0.1, 0.9]), np.array([0.8, 0.2]))
    cost = CostModel(1.0, 1.0)
    zeros = RelaxedAllocation(np.zeros(2))
    assert directional_derivative(inst, cost, zeros, RelaxedAllocation(np.array([1.0, 0.0]))) < 0.0


def test_directional_derivative_is_linear():
    rng = np.random.default_rng(44)
    inst = random_instance(rng, 8)
    cost = CostModel(1.5, 2.5)
    f_star = relaxed_minimum(inst, cost).allocation
    for _ in range(50):
        a, b = RelaxedAllocation(rng.random(8)), RelaxedAllocation(rng.random(8))
        w = float(rng.random())
        mix = RelaxedAllocation(w * a.f + (1 - w) * b.f)
        expected = w * directional_derivative(inst, cost, f_star, a) \
            + (1 - w) * directional_derivative(inst, cost, f_star, b)
        assert directional_derivative(inst, cost, f_star, mix) == pytest.approx(expected, abs=1e-12)


def test_length_mismatch():
    inst = random_instance(np.random.default_rng(1), 3)
    with pytest.raises(InputError):
        directional_derivative(inst, CostModel(1.0, 1.0), RelaxedAllocation(np.zeros(3)),
                               RelaxedAllocation(np.zeros(4)))


def test_brute_force_guard():
    inst = random_instance(np.random.default_rng(2), 23)
    with pytest.raises(EnumerationLimitError):
        brute_force_indicator_minimum(inst, CostModel(1.0, 1.0))


def test_grid_parse():
    grid = Grid.parse("-8:9:1001")
    assert (grid.lo, grid.hi, grid.n) == (-8.0, 9.0, 1001)
    assert len(grid.points()) == 1001
    for bad in ("1:0:10", "0:1:1", "a:b:c", "0:1"):
        with pytest.raises(InputError):
            Grid.parse(bad)


def test_discretize_gaussian_grid():
    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(1.0, 1.0))
    inst = discretize(pair, Grid(-8.0, 9.0, 1001))
    assert inst.n == 1001
    assert math.fsum(inst.q0) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(inst.q1) == pytest.approx(1.0, abs=1e-12)


def test_discretize_refuses_narrow_grid():
    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(1.0, 1.0))
    with pytest.raises(DiscretizationError):
        discretize(pair, Grid(0.0, 1.0, 50))
    with pytest.raises(InputError):
        discretize(pair)


def test_discretize_poisson_truncation():
    inst = discretize(HypothesisPair(Poisson(1.0), Poisson(2.0)))
    assert inst.atoms[0] == 0
    top = int(inst.atoms[-1])
    assert Poisson(2.0).sf(top) < 1e-12
    assert list(inst.atoms) == list(range(top + 1))


def test_discretize_tabulated_passes_through():
    pair = HypothesisPair(Tabulated((2, 0), (0.4, 0.6)), Tabulated((0, 2), (0.3, 0.7)))
    inst = discretize(pair)
    assert list(inst.atoms) == [0, 2]
    assert list(inst.q0) == pytest.approx([0.6, 0.4])
    assert list(inst.q1) == pytest.approx([0.3, 0.7])


def test_gaussian_mean_grid_recovers_cutoff(gaussian_pair, unit_cost):
    # the statistic of 100 observations is gaussian(m, 0.36)
    inst = discretize(gaussian_pair, Grid(-3.0, 4.2, 721))
    support = relaxed_minimum(inst, unit_cost).allocation.support()
    region = inst.atoms[sorted(support)]
    cutoff = mean_threshold(gaussian_pair, 0.0)
    assert region.min() == pytest.approx(cutoff, abs=0.01 + 1e-12)
    assert np.all(np.diff(sorted(support)) == 1)


def test_verify_instances_summary():
    summary = verify_instances(100, 12, seed=7, directions=1000)
    assert summary.instances == 100
    assert summary.tight_count == 100
    assert summary.min_derivative >= -1e-12
    assert summary.all_ok
    assert summary.headline().startswith("100/100 tight, min directional derivative >= -1e-12")


def test_verify_instances_ignores_worker_count():
    serial = verify_instances(12, 8, seed=3, directions=50)
    threaded = verify_instances(12, 8, seed=3, directions=50, workers=4)
    assert serial.checks == threaded.checks


def test_verify_instances_validation():
    with pytest.raises(InputError):
        verify_instances(0, 5, seed=1, directions=10)
    with pytest.raises(EnumerationLimitError):
        verify_instances(5, 30, seed=1, directions=10)


def test_verify_pair_poisson(poisson_pair, unit_cost):
    check = verify_pair(poisson_pair, unit_cost, None, seed=1, directions=200)
    assert check.tight
    assert check.variational_inequality_holds


def test_verify_pair_large_grid_skips_brute_force(unit_cost):
    pair = HypothesisPair(Gaussian(0.0, 1.0), Gaussian(1.0, 1.0))
    check = verify_pair(pair, unit_cost, Grid(-8.0, 9.0, 1001), seed=1, directions=100)
    assert check.brute_force_value is None
    assert check.gap is None
    assert check.variational_inequality_holds
