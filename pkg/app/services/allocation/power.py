import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from app.core.exceptions import InfeasibleSensingError, OptimizerConsistencyError, ScenarioError
from app.schemas.allocation import KktCertificate, PowerAllocation, Regime, SensingRequirement
from app.schemas.scenario import ScenarioConfig
from app.services.channel.geometry import steering_derivative_norm_sq

logger = logging.getLogger(__name__)

ROOT_RTOL = 1e-15
ROOT_XTOL = 1e-300
INACTIVE_FLOOR = 1e-15
FEASIBILITY_RTOL = 1e-12


def gamma_from_epsilon(scenario: ScenarioConfig, epsilon: float) -> SensingRequirement:
    """Echo-power threshold equivalent to CRB <= epsilon."""
    if epsilon <= 0:
        raise ScenarioError(f"CRB target must be positive, got {epsilon}")
    denominator = (
        2 * scenario.t_symbols * scenario.beta_tilde_sq
        * steering_derivative_norm_sq(scenario.n_r) * epsilon
    )
    if denominator <= 0:
        raise ScenarioError("echo amplitude or sensor derivative vanishes: no CRB target is reachable")
    return SensingRequirement(epsilon=epsilon, gamma_s=scenario.sigma2_s / denominator)


@dataclass(frozen=True)
class AllocationProblem:
    """
    max sum log(1 + a_k p_k)  s.t.  sum p_k + p_s <= P,
    sum b_k p_k + p_s * sum b_k >= gamma_s, all powers nonnegative.
    `gains` are per-watt SNRs, `sensing` per-watt echo gains.
    """
    gains: np.ndarray
    sensing: np.ndarray
    p_max: float
    gamma_s: float

    @property
    def sensing_total(self) -> float:
        return float(self.sensing.sum())

    @property
    def complement(self) -> np.ndarray:
        return self.sensing_total - self.sensing

    def objective(self, p_c: Sequence[float]) -> float:
        return float(np.sum(np.log2(1.0 + self.gains * np.asarray(p_c))))

    def echo(self, p_c: Sequence[float], p_s: float) -> float:
        return float(self.sensing @ np.asarray(p_c) + p_s * self.sensing_total)


def _levels(gains: np.ndarray, inverse_level: np.ndarray) -> np.ndarray:
    """[1/w_k - 1/a_k]^+ with w the per-stream price; dead streams stay at zero."""
    powers = np.zeros_like(gains)
    live = gains > 0
    with np.errstate(divide="ignore"):
        raw = 1.0 / inverse_level[live] - 1.0 / gains[live]
    raw[raw <= INACTIVE_FLOOR / gains[live]] = 0.0
    powers[live] = raw
    return powers


def _sensing_active_powers(problem: AllocationProblem, mu: float) -> np.ndarray:
    """Multi-level water-filling with price mu * (B - b_k) per stream."""
    return _levels(problem.gains, mu * problem.complement)


def _expand_down(f: Callable[[float], float], start: float, want_positive: bool) -> float:
    x = start
    for _ in range(2000):
        value = f(x)
        if (value > 0) == want_positive and value != 0:
            return x
        x /= 4.0
        if x <= 1e-300:
            break
    raise OptimizerConsistencyError(f"failed to bracket a root below {start:.6g}")


def _root(f: Callable[[float], float], low: float, high: float) -> float:
    return float(brentq(f, low, high, xtol=ROOT_XTOL, rtol=ROOT_RTOL, maxiter=500))


def _sensing_multiplier(problem: AllocationProblem) -> Optional[float]:
    """
    Root of G(mu) = B P - sum (B - b_k) p_k(mu) - gamma_s, or None when a
    live stream carries the whole echo gain (dedicated sensing is then never used).
    """
    live = problem.gains > 0
    complement = problem.complement
    if not np.any(live) or np.any(complement[live] <= 0):
        return None

    mu_high = float(np.max(problem.gains[live] / complement[live]))

    def excess(mu: float) -> float:
        powers = _sensing_active_powers(problem, mu)
        return problem.sensing_total * problem.p_max - complement @ powers - problem.gamma_s

    if excess(mu_high) <= 0:
        return mu_high
    mu_low = _expand_down(excess, mu_high, want_positive=False)
    return _root(excess, mu_low, mu_high)


def _power_price(problem: AllocationProblem, mu: float) -> float:
    """nu >= 0 with sum_k [1/(mu (B - b_k) + nu) - 1/a_k]^+ = P."""
    nu_high = float(problem.gains.max())

    def surplus(nu: float) -> float:
        return _levels(problem.gains, mu * problem.complement + nu).sum() - problem.p_max

    if np.isfinite(surplus(0.0)) and surplus(0.0) <= 0:
        return 0.0
    nu_low = _expand_down(surplus, nu_high, want_positive=True)
    return _root(surplus, nu_low, nu_high)


def _max_dual_multiplier(problem: AllocationProblem) -> float:
    """Largest mu at which the budget can still be spent on data streams alone."""
    live = problem.gains > 0
    complement = problem.complement
    if np.any(complement[live] <= 0):
        # A stream carrying the whole echo gain absorbs any budget, so every mu
        # is admissible and the echo surplus turns positive as mu grows
        mu = 1.0
        for _ in range(500):
            if _dual_echo_surplus(problem, mu) >= 0:
                return mu
            mu *= 4.0
        raise OptimizerConsistencyError("failed to bracket the sensing multiplier from above")

    mu_high = float(np.max(problem.gains[live] / complement[live]))

    def surplus(mu: float) -> float:
        return _sensing_active_powers(problem, mu).sum() - problem.p_max

    mu_low = _expand_down(surplus, mu_high, want_positive=True)
    return _root(surplus, mu_low, mu_high)


def _dual_echo_surplus(problem: AllocationProblem, mu: float) -> float:
    nu = _power_price(problem, mu)
    powers = _levels(problem.gains, mu * problem.complement + nu)
    return float(problem.sensing @ powers - problem.gamma_s)


def _certificate(problem: AllocationProblem, regime: Regime, p_c: np.ndarray, p_s: float,
                 mu: float, nu: float) -> KktCertificate:
    return KktCertificate(
        regime=regime,
        mu_star=max(mu, 0.0),
        nu_star=max(nu, 0.0),
        lambda_star=max(mu * problem.sensing_total + nu, 0.0),
        sensing_slack=problem.echo(p_c, p_s) - problem.gamma_s,
        power_slack=problem.p_max - float(p_c.sum() + p_s),
    )


def solve_allocation(problem: AllocationProblem) -> Tuple[PowerAllocation, KktCertificate]:
    """
    Exact optimum of the sensing-constrained sum-rate problem.

    Checked in order: dedicated sensing power active with the echo constraint
    tight; plain water-filling with the echo constraint slack; both
    constraints tight with no dedicated sensing power.
    """
    gains, p_max, gamma_s = problem.gains, problem.p_max, problem.gamma_s
    gamma_max = p_max * problem.sensing_total
    if gamma_s > gamma_max * (1 + FEASIBILITY_RTOL):
        raise InfeasibleSensingError(gamma_s, gamma_max)

    live = gains > 0
    if not np.any(live):
        p_c = np.zeros_like(gains)
        p_s = p_max if gamma_s > 0 else 0.0
        regime = Regime.SENSING_ACTIVE if gamma_s > 0 else Regime.COMM_WATERFILL
        return _finish(problem, regime, p_c, p_s, 0.0, 0.0)

    if gamma_s > 0:
        mu_star = _sensing_multiplier(problem)
        if mu_star is not None:
            p_c = _sensing_active_powers(problem, mu_star)
            margin = p_max - p_c.sum()
            if margin > 0:
                logger.debug(f"Dedicated sensing active: mu={mu_star:.6g}, p_s={margin:.6g}")
                return _finish(problem, Regime.SENSING_ACTIVE, p_c, float(margin), mu_star, 0.0)

    nu_plain = _power_price(problem, 0.0)
    p_c = _levels(gains, np.full_like(gains, nu_plain))
    if gamma_s <= 0 or problem.echo(p_c, 0.0) >= gamma_s:
        return _finish(problem, Regime.COMM_WATERFILL, p_c, 0.0, 0.0, nu_plain)

    mu_high = _max_dual_multiplier(problem)
    if _dual_echo_surplus(problem, mu_high) <= 0:
        mu_star = mu_high
    else:
        mu_star = _root(lambda mu: _dual_echo_surplus(problem, mu), 0.0, mu_high)
    nu_star = _power_price(problem, mu_star)
    p_c = _levels(gains, mu_star * problem.complement + nu_star)
    logger.debug(f"Both constraints tight: mu={mu_star:.6g}, nu={nu_star:.6g}")
    return _finish(problem, Regime.DUAL_CONSTRAINED, p_c, 0.0, mu_star, nu_star)


def _finish(problem: AllocationProblem, regime: Regime, p_c: np.ndarray, p_s: float,
            mu: float, nu: float) -> Tuple[PowerAllocation, KktCertificate]:
    # Guard against round-off pushing the total past the budget
    total = p_c.sum() + p_s
    if total > problem.p_max:
        if p_s > 0:
            p_s = max(problem.p_max - p_c.sum(), 0.0)
        else:
            p_c = p_c * (problem.p_max / total)
    alloc = PowerAllocation(p_c=tuple(float(p) for p in p_c), p_s=float(p_s))
    return alloc, _certificate(problem, regime, np.asarray(alloc.p_c), alloc.p_s, mu, nu)


def kkt_residuals(problem: AllocationProblem, alloc: PowerAllocation, cert: KktCertificate) -> Dict[str, float]:
    """
    Residuals of the optimality conditions, normalized by the budget price:
    stationarity on active streams, dual feasibility on inactive streams,
    complementary slackness and primal feasibility.
    """
    p_c = np.asarray(alloc.p_c)
    price = cert.lambda_star - cert.mu_star * problem.sensing
    scale = max(cert.lambda_star, 1e-300)

    active = p_c > 0
    marginal = problem.gains / (1.0 + problem.gains * p_c)
    stationarity = np.abs(marginal[active] - price[active]) / scale
    dual = np.maximum(problem.gains[~active] - price[~active], 0.0) / scale
    dedicated = abs(cert.lambda_star - cert.mu_star * problem.sensing_total - cert.nu_star) / scale

    gamma_scale = max(problem.gamma_s, 1e-300)
    return {
        "stationarity": float(stationarity.max(initial=0.0)),
        "dual_feasibility": float(dual.max(initial=0.0)),
        "dedicated_power": float(dedicated),
        "sensing_complementarity": float(cert.mu_star * abs(cert.sensing_slack) / (scale * problem.p_max)),
        "power_slack": float(abs(cert.power_slack) / problem.p_max),
        "sensing_violation": float(max(-cert.sensing_slack, 0.0) / gamma_scale),
    }


def colocated_problem(scenario: ScenarioConfig, gamma_s: float) -> AllocationProblem:
    """Coefficients under aligned phases, where every cascade reaches N_k."""
    gains = np.array([
        scenario.m_t * scenario.m_r * (s.rho_bi * s.rho_iu * s.n_elements) ** 2 / scenario.sigma2_c
        for s in scenario.sites
    ])
    sensing = np.array([scenario.m_t * (s.rho_bi * s.n_elements) ** 2 for s in scenario.sites])
    return AllocationProblem(gains=gains, sensing=sensing, p_max=scenario.p_max, gamma_s=max(gamma_s, 0.0))


def solve_colocated(scenario: ScenarioConfig, gamma_s: float) -> Tuple[PowerAllocation, KktCertificate]:
    if not scenario.is_colocated:
        raise ScenarioError("closed-form allocation needs the CU and the target at the same location")
    alloc, cert = solve_allocation(colocated_problem(scenario, gamma_s))
    logger.debug(f"Co-located allocation (K={scenario.k}): regime={cert.regime.value}")
    return alloc, cert


def activation_margin(scenario: ScenarioConfig, gamma_s: float) -> float:
    """
    Budget left for a dedicated sensing beam after multi-level water-filling
    at the sensing multiplier; positive exactly when that beam is switched on.
    """
    problem = colocated_problem(scenario, gamma_s)
    gamma_max = problem.p_max * problem.sensing_total
    if gamma_s > gamma_max * (1 + FEASIBILITY_RTOL):
        raise InfeasibleSensingError(gamma_s, gamma_max)
    mu_star = _sensing_multiplier(problem)
    if mu_star is None:
        return float("-inf")
    return float(problem.p_max - _sensing_active_powers(problem, mu_star).sum())


def element_threshold(scenario: ScenarioConfig, gamma_s: float, k: Optional[int] = None) -> Tuple[float, List[float]]:
    """
    Element count above which equal-split water-filling over all k streams is
    optimal with the echo constraint satisfied; also returns the path-loss
    spread terms xi_k.
    """
    k = k or scenario.k
    sites = scenario.sites[:k]
    inverse = np.array([1.0 / (s.rho_bi * s.rho_iu) ** 2 for s in sites])
    xi = inverse - inverse.mean()
    rho_bi_sq = np.array([s.rho_bi ** 2 for s in sites])

    sensing_term = k ** 3 * (gamma_s + scenario.sigma2_c / scenario.m_r * float(xi @ rho_bi_sq)) / (
        scenario.p_max * scenario.m_t * rho_bi_sq.sum()
    )
    activity_term = k ** 3 * float(xi.max()) * scenario.sigma2_c / (scenario.p_max * scenario.m_t * scenario.m_r)
    threshold = max(np.sqrt(max(sensing_term, 0.0)), np.sqrt(max(activity_term, 0.0)))
    return float(threshold), [float(x) for x in xi]


def asymptotic_rate(scenario: ScenarioConfig, k: Optional[int] = None, n: Optional[int] = None) -> float:
    """Rate of equal power P/K over k aligned subchannels with N/K elements each."""
    k = k or scenario.k
    n = n or scenario.n_total
    snr = np.array([
        scenario.p_max * (s.rho_bi * s.rho_iu) ** 2 * scenario.m_t * scenario.m_r * n ** 2
        / (k ** 3 * scenario.sigma2_c)
        for s in scenario.sites[:k]
    ])
    return float(np.sum(np.log2(1.0 + snr)))
