import numpy as np
import pytest

from app.core.exceptions import InfeasibleSensingError, ScenarioError
from app.schemas.allocation import PowerAllocation, Regime
from app.services.allocation.power import (
    AllocationProblem,
    activation_margin,
    asymptotic_rate,
    colocated_problem,
    element_threshold,
    gamma_from_epsilon,
    kkt_residuals,
    solve_allocation,
    solve_colocated,
)
from app.services.channel.geometry import comm_aligned_phases
from app.services.comm.rate import rate_from_allocation, waterfill
from tests.conftest import equalized


def random_problem(rng: np.random.Generator, k: int) -> AllocationProblem:
    gains = rng.uniform(1.0, 50.0, k)
    sensing = rng.uniform(0.5, 2.0, k)
    gamma_s = rng.uniform(0.1, 0.95) * sensing.sum()
    return AllocationProblem(gains=gains, sensing=sensing, p_max=1.0, gamma_s=gamma_s)


def grid_oracle(problem: AllocationProblem, step: float) -> float:
    """Best objective on a simplex grid; leftover budget goes to the sensing beam."""
    ticks = np.arange(0.0, problem.p_max + step / 2, step)
    mesh = np.stack(np.meshgrid(*[ticks] * len(problem.gains), indexing="ij"), axis=-1).reshape(-1, len(problem.gains))
    mesh = mesh[mesh.sum(axis=1) <= problem.p_max + 1e-12]
    p_s = np.maximum(problem.p_max - mesh.sum(axis=1), 0.0)
    echo = mesh @ problem.sensing + p_s * problem.sensing_total
    feasible = mesh[echo >= problem.gamma_s]
    return float(np.max(np.sum(np.log2(1.0 + feasible * problem.gains), axis=1)))


def grid_oracle_three(problem: AllocationProblem, step: float) -> float:
    """
    Three streams on a (p1, p2) grid. The echo falls as p3 takes budget from
    the sensing beam, so the best p3 is the largest one the requirement allows.
    """
    s, total = problem.sensing, problem.sensing_total
    ticks = np.arange(0.0, problem.p_max + step / 2, step)
    p1, p2 = (m.ravel() for m in np.meshgrid(ticks, ticks, indexing="ij"))
    left = problem.p_max - p1 - p2
    keep = left >= -1e-12
    p1, p2, left = p1[keep], p2[keep], np.maximum(left[keep], 0.0)
    allowed = (s[0] * p1 + s[1] * p2 + left * total - problem.gamma_s) / (total - s[2])
    p3 = np.minimum(left, allowed)
    feasible = p3 >= 0
    powers = np.column_stack([p1, p2, p3])[feasible]
    return float(np.max(np.sum(np.log2(1.0 + powers * problem.gains), axis=1)))


class TestSensingThreshold:
    def test_halving_epsilon_doubles_gamma(self, default_template):
        scenario = default_template.first(2)
        loose = gamma_from_epsilon(scenario, 1e-4).gamma_s
        assert gamma_from_epsilon(scenario, 5e-5).gamma_s == pytest.approx(2 * loose)

    def test_nonpositive_epsilon_rejected(self, default_template):
        with pytest.raises(ScenarioError):
            gamma_from_epsilon(default_template.first(1), 0.0)


class TestSolveAllocation:
    def test_infeasible(self):
        problem = AllocationProblem(np.array([1.0, 2.0]), np.array([1.0, 1.0]), 1.0, 2.5)
        with pytest.raises(InfeasibleSensingError) as info:
            solve_allocation(problem)
        assert info.value.gamma_max == pytest.approx(2.0)

    def test_no_requirement_is_water_filling(self):
        gains = np.array([3.0, 1.0, 0.2])
        alloc, cert = solve_allocation(AllocationProblem(gains, np.ones(3), 2.0, 0.0))
        expected, _ = waterfill(gains, 2.0, 1.0)
        np.testing.assert_allclose(alloc.p_c, expected, rtol=1e-9, atol=1e-12)
        assert cert.regime == Regime.COMM_WATERFILL
        assert alloc.p_s == 0.0

    def test_boundary_requirement_is_all_sensing(self):
        problem = AllocationProblem(np.array([5.0, 2.0]), np.array([1.0, 0.5]), 1.0, 1.5)
        alloc, cert = solve_allocation(problem)
        assert alloc.p_s == pytest.approx(1.0, rel=1e-9)
        assert cert.regime == Regime.SENSING_ACTIVE

    @pytest.mark.parametrize("seed", range(10))
    def test_two_streams_beat_grid_search(self, seed):
        problem = random_problem(np.random.default_rng(seed), 2)
        alloc, cert = solve_allocation(problem)
        assert problem.objective(alloc.p_c) >= grid_oracle(problem, 5e-4) - 1e-6
        assert max(kkt_residuals(problem, alloc, cert).values()) < 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_three_streams_beat_grid_search(self, seed):
        problem = random_problem(np.random.default_rng(100 + seed), 3)
        alloc, cert = solve_allocation(problem)
        assert problem.objective(alloc.p_c) >= grid_oracle_three(problem, 5e-4) - 1e-6
        assert max(kkt_residuals(problem, alloc, cert).values()) < 1e-8

    def test_feasible_and_within_budget(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            problem = random_problem(rng, int(rng.integers(1, 6)))
            alloc, cert = solve_allocation(problem)
            assert alloc.total <= problem.p_max * (1 + 1e-12)
            assert problem.echo(alloc.p_c, alloc.p_s) >= problem.gamma_s * (1 - 1e-9)


class TestRegimes:
    def test_sequence_and_continuity(self, default_template):
        scenario = default_template.first(4)
        problem = colocated_problem(scenario, 0.0)
        gamma_max = problem.p_max * problem.sensing_total
        grid = np.linspace(0.0, gamma_max, 201)[1:-1]

        regimes = [solve_colocated(scenario, g)[1].regime for g in grid]
        sequence = [r for i, r in enumerate(regimes) if i == 0 or r != regimes[i - 1]]
        assert sequence in (
            [Regime.COMM_WATERFILL, Regime.DUAL_CONSTRAINED, Regime.SENSING_ACTIVE],
            [Regime.COMM_WATERFILL, Regime.SENSING_ACTIVE],
        )

        for i in range(len(grid) - 1):
            if regimes[i] == regimes[i + 1]:
                continue
            low, high = grid[i], grid[i + 1]
            for _ in range(60):
                mid = 0.5 * (low + high)
                if solve_colocated(scenario, mid)[1].regime == regimes[i]:
                    low = mid
                else:
                    high = mid
            rate_low = problem.objective(solve_colocated(scenario, low)[0].p_c)
            rate_high = problem.objective(solve_colocated(scenario, high)[0].p_c)
            assert abs(rate_low - rate_high) < 1e-6

    def test_activation_margin_sign(self, default_template):
        scenario = default_template.first(4)
        gamma_max = colocated_problem(scenario, 0.0).sensing_total * scenario.p_max
        for gamma_s in np.linspace(0.01, 0.99, 50) * gamma_max:
            regime = solve_colocated(scenario, gamma_s)[1].regime
            assert (activation_margin(scenario, gamma_s) > 0) == (regime == Regime.SENSING_ACTIVE)

    def test_activation_margin_grows_with_requirement(self, default_template):
        scenario = default_template.first(4)
        gamma_max = colocated_problem(scenario, 0.0).sensing_total * scenario.p_max
        margins = [activation_margin(scenario, f * gamma_max) for f in (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)]
        assert all(a <= b for a, b in zip(margins, margins[1:]))
        assert margins[-1] > 0

    def test_activation_margin_shrinks_with_budget(self, default_template):
        """A larger budget leaves the comm streams more room to meet the echo target."""
        scenario = default_template.first(4)
        gamma_s = 0.9 * colocated_problem(scenario, 0.0).sensing_total * scenario.p_max
        margins = [activation_margin(scenario.model_copy(update={"p_max": p}), gamma_s)
                   for p in (1.0, 1.02, 1.05, 1.1, 1.2)]
        assert all(a >= b for a, b in zip(margins, margins[1:]))
        assert margins[0] > 0

    def test_requires_colocation(self, separated_template):
        with pytest.raises(ScenarioError):
            solve_colocated(separated_template.first(2), 1e-12)


class TestElementThreshold:
    def test_equal_split_water_filling_above_threshold(self, default_template):
        k = 2
        base = equalized(default_template.first(k))
        rho_bi = base.sites[0].rho_bi
        target = 101.3
        gamma_s = target ** 2 * base.p_max * base.m_t * k * rho_bi ** 2 / k ** 3

        threshold, xi = element_threshold(base, gamma_s)
        assert threshold == pytest.approx(target, rel=1e-9)
        np.testing.assert_allclose(xi, 0.0, atol=1e-6)

        def equal_split_optimal(n_total: int) -> bool:
            scenario = equalized(base, n_total=n_total)
            try:
                alloc, cert = solve_colocated(scenario, gamma_s)
            except InfeasibleSensingError:
                return False
            powers = np.asarray(alloc.p_c)
            return (cert.regime == Regime.COMM_WATERFILL and np.all(powers > 0)
                    and np.allclose(powers, powers[0], rtol=1e-9))

        first = next(n for n in range(k, 400, k) if equal_split_optimal(n))
        assert abs(first - threshold) <= k
        assert not equal_split_optimal(first - k)

    def test_unequal_path_losses(self, default_template):
        k = 2
        rho_bi, rho_iu = (1.0e-4, 0.8e-4), (1.0e-4, 1.5e-4)

        def build(n_total: int):
            base = default_template.first(k)
            sites = tuple(
                s.model_copy(update={"rho_bi": b, "rho_iu": u, "n_elements": n_total // k})
                for s, b, u in zip(base.sites, rho_bi, rho_iu)
            )
            return base.model_copy(update={"sites": sites, "n_total": n_total})

        base = build(200)
        _, xi = element_threshold(base, 0.0)
        assert abs(xi[0]) > 0 and xi[0] == pytest.approx(-xi[1], rel=1e-12)
        target = 101.3
        spread = base.sigma2_c / base.m_r * float(np.dot(xi, np.square(rho_bi)))
        gamma_s = target ** 2 * base.p_max * base.m_t * float(np.sum(np.square(rho_bi))) / k ** 3 - spread
        threshold, _ = element_threshold(base, gamma_s)
        assert threshold == pytest.approx(target, rel=1e-9)

        def all_streams_water_filled(n_total: int) -> bool:
            scenario = build(n_total)
            try:
                alloc, cert = solve_colocated(scenario, gamma_s)
            except InfeasibleSensingError:
                return False
            return cert.regime == Regime.COMM_WATERFILL and bool(np.all(np.asarray(alloc.p_c) > 0))

        grid = range(k, 300, k)
        outcome = [all_streams_water_filled(n) for n in grid]
        assert outcome == [n >= threshold for n in grid]


class TestAsymptoticRate:
    def test_matches_equal_power_on_aligned_sites(self, default_template):
        scenario = equalized(default_template.first(4))
        alloc = PowerAllocation(p_c=(scenario.p_max / 4,) * 4, p_s=0.0)
        rate = rate_from_allocation(scenario, comm_aligned_phases(scenario), alloc)
        assert asymptotic_rate(scenario) == pytest.approx(rate, rel=1e-10)
