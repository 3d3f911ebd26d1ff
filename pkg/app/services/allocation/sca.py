import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import InfeasibleSensingError, OptimizerConsistencyError
from app.schemas.allocation import KktCertificate, PowerAllocation
from app.schemas.scenario import ScenarioConfig
from app.services.allocation.power import AllocationProblem, solve_allocation
from app.services.channel.geometry import (
    PhaseShifts,
    cascade_vector,
    comm_aligned_phases,
    sensing_aligned_phases,
)
from app.services.comm.rate import rate_from_allocation, subchannel_gains
from app.services.sensing.crb import sensing_coefficients

logger = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-8
MAX_INNER_ITER = 500
ASCENT_TOL = 1e-9


@dataclass(frozen=True)
class QuadraticForms:
    """
    Rank-one cascade forms per site: the comm cascade gain is
    v^H q_c q_c^H v and the echo cascade gain is v^H q_s q_s^H v.
    """
    q_c: Tuple[np.ndarray, ...]
    q_s: Tuple[np.ndarray, ...]

    def matrix_c(self, k: int) -> np.ndarray:
        return np.outer(self.q_c[k], self.q_c[k].conj())

    def matrix_s(self, k: int) -> np.ndarray:
        return np.outer(self.q_s[k], self.q_s[k].conj())


@dataclass(frozen=True)
class AffineMinorant:
    """g(v) = offset + 2 Re(gradient^H v), tangent to v^H Q v at the anchor."""
    gradient: np.ndarray
    offset: float

    def __call__(self, v: np.ndarray) -> float:
        return float(self.offset + 2.0 * np.real(np.vdot(self.gradient, v)))


@dataclass
class ScaState:
    phases: PhaseShifts
    allocation: PowerAllocation
    certificate: Optional[KktCertificate]
    objective: float
    iteration: int = 0
    converged: bool = False
    history: List[float] = field(default_factory=list)
    objective_pre_projection: float = float("nan")

    @property
    def projection_loss(self) -> float:
        return self.objective_pre_projection - self.objective


def build_quadratic_forms(scenario: ScenarioConfig) -> QuadraticForms:
    q_c, q_s = [], []
    for k, site in enumerate(scenario.sites):
        echo_departure = scenario.mu_target if k == 0 else site.mu_it_d
        q_c.append(cascade_vector(site, site.mu_iu_d).conj())
        q_s.append(cascade_vector(site, echo_departure).conj())
    return QuadraticForms(tuple(q_c), tuple(q_s))


def sca_linearize(q: np.ndarray, v_anchor: np.ndarray) -> AffineMinorant:
    """First-order expansion of the convex quadratic v^H Q v at the anchor."""
    q = np.asarray(q, dtype=complex)
    v_anchor = np.asarray(v_anchor, dtype=complex)
    gradient = q @ v_anchor
    return AffineMinorant(gradient=gradient, offset=-float(np.real(np.vdot(v_anchor, gradient))))


def linearize_rank_one(q: np.ndarray, v_anchor: np.ndarray) -> AffineMinorant:
    """Same minorant for Q = q q^H without forming the matrix."""
    inner = np.vdot(q, v_anchor)
    return AffineMinorant(gradient=q * inner, offset=-float(abs(inner) ** 2))


def _disc(y: np.ndarray) -> np.ndarray:
    magnitude = np.abs(y)
    return np.where(magnitude > 1.0, y / np.maximum(magnitude, 1e-300), y)


class _FeasibleSet:
    """Product of unit discs, optionally cut by Re(w^H v) >= h."""

    def __init__(self, w: Optional[np.ndarray], h: float):
        self.w = w
        self.h = h

    def margin(self, v: np.ndarray) -> float:
        if self.w is None:
            return float("inf")
        return float(np.real(np.vdot(self.w, v)) - self.h)

    def is_empty(self) -> bool:
        return self.w is not None and float(np.abs(self.w).sum()) < self.h

    def project(self, y: np.ndarray) -> np.ndarray:
        z = _disc(y)
        if self.margin(z) >= 0:
            return z

        # Exact projection: z(eta) = disc(y + eta w), margin monotone in eta
        low, high = 0.0, 1.0 / max(float(np.vdot(self.w, self.w).real), 1e-300)
        for _ in range(2000):
            if self.margin(_disc(y + high * self.w)) >= 0:
                break
            low, high = high, high * 2.0
        for _ in range(200):
            mid = 0.5 * (low + high)
            if self.margin(_disc(y + mid * self.w)) >= 0:
                high = mid
            else:
                low = mid
            if high - low <= 1e-15 * high:
                break
        return _disc(y + high * self.w)


def _split(flat: np.ndarray, sizes: List[int]) -> PhaseShifts:
    bounds = np.cumsum([0] + sizes)
    return PhaseShifts(tuple(flat[bounds[i]:bounds[i + 1]].copy() for i in range(len(sizes))))


def phase_subproblem(scenario: ScenarioConfig, forms: QuadraticForms, alloc: PowerAllocation,
                     anchor: PhaseShifts, gamma_s: float,
                     max_inner: int = MAX_INNER_ITER, tol: float = STATIONARITY_TOL) -> PhaseShifts:
    """
    Maximizes the sum rate with every cascade gain replaced by its tangent
    minorant at `anchor`, over per-entry unit discs and the linearized echo
    constraint. Projected gradient ascent with backtracking; the projection
    onto discs intersected with the echo halfspace is exact.
    """
    anchor.validate_for(scenario, unit_modulus=False, tol=1e-12)
    sizes = [site.n_elements for site in scenario.sites]
    bounds = np.cumsum([0] + sizes)
    p_c = np.asarray(alloc.p_c)

    # Data-rate terms: log2(1 + s_k * (2 Re(u_k^H v_k) - |c_k|^2))
    minorants_c = [linearize_rank_one(q, v) for q, v in zip(forms.q_c, anchor.vectors)]
    scale = np.array([
        p * scenario.m_r * scenario.m_t * (site.rho_bi * site.rho_iu) ** 2 / scenario.sigma2_c
        for p, site in zip(p_c, scenario.sites)
    ])

    def objective(v: np.ndarray) -> float:
        total = 0.0
        for k in range(scenario.k):
            if scale[k] == 0:
                continue
            argument = 1.0 + scale[k] * minorants_c[k](v[bounds[k]:bounds[k + 1]])
            if argument <= 0:
                return float("-inf")
            total += np.log2(argument)
        return float(total)

    def gradient(v: np.ndarray) -> np.ndarray:
        g = np.zeros_like(v)
        for k in range(scenario.k):
            if scale[k] == 0:
                continue
            argument = 1.0 + scale[k] * minorants_c[k](v[bounds[k]:bounds[k + 1]])
            g[bounds[k]:bounds[k + 1]] = 2.0 * scale[k] * minorants_c[k].gradient / (np.log(2) * argument)
        return g

    # Echo constraint: sum_k omega_k (2 Re(d_k^H v_k) - |q_s^H v_a|^2) >= gamma_s
    feasible = _FeasibleSet(None, 0.0)
    if gamma_s > 0:
        omega = np.array([
            scenario.m_t * (alloc.p_s + p) * site.rho_bi ** 2 for p, site in zip(p_c, scenario.sites)
        ])
        minorants_s = [linearize_rank_one(q, v) for q, v in zip(forms.q_s, anchor.vectors)]
        w = np.concatenate([2.0 * o * m.gradient for o, m in zip(omega, minorants_s)])
        h = gamma_s - float(sum(o * m.offset for o, m in zip(omega, minorants_s)))
        feasible = _FeasibleSet(w, h)
        if feasible.is_empty():
            logger.warning("Linearized echo constraint is empty; taking a restoration step")
            restored = np.where(np.abs(w) > 0, w / np.maximum(np.abs(w), 1e-300), np.concatenate(anchor.vectors))
            return _split(restored, sizes)

    v = feasible.project(np.concatenate(anchor.vectors))
    value = objective(v)
    g = gradient(v)
    step = 1.0 / max(float(np.abs(g).max(initial=0.0)), 1e-300)
    reference = None

    for iteration in range(max_inner):
        g = gradient(v)
        accepted = False
        while step > 1e-30:
            candidate = feasible.project(v + step * g)
            move = candidate - v
            candidate_value = objective(candidate)
            bound = value + float(np.real(np.vdot(g, move))) - float(np.vdot(move, move).real) / (2 * step)
            if candidate_value >= bound - 1e-15 * abs(value):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break

        mapping = float(np.linalg.norm(move)) / step
        reference = reference or max(mapping, 1.0)
        v, value = candidate, candidate_value
        if mapping <= tol * reference:
            logger.debug(f"Phase step stationary after {iteration + 1} iterations")
            break
        step *= 2.0

    return _split(v, sizes)


def power_subproblem(scenario: ScenarioConfig, phases: PhaseShifts, gamma_s: float) -> Tuple[PowerAllocation, KktCertificate]:
    """Exact allocation for fixed phases, with gains taken from the actual cascades."""
    problem = AllocationProblem(
        gains=subchannel_gains(scenario, phases).gains / scenario.sigma2_c,
        sensing=sensing_coefficients(scenario, phases),
        p_max=scenario.p_max,
        gamma_s=max(gamma_s, 0.0),
    )
    return solve_allocation(problem)


def _initial_phases(scenario: ScenarioConfig, gamma_s: float, init: Optional[PhaseShifts]) -> PhaseShifts:
    """The given start, or the CU-aligned design; sensing-aligned phases when either misses gamma_s."""
    first = init if init is not None else comm_aligned_phases(scenario)
    candidates = [first, sensing_aligned_phases(scenario)]
    for phases in candidates:
        reach = scenario.p_max * float(sensing_coefficients(scenario, phases).sum())
        if reach >= gamma_s:
            return phases
        logger.debug(f"Initial phases reach {reach:.6g} < gamma_s={gamma_s:.6g}; trying the next candidate")
    reach = scenario.p_max * float(sensing_coefficients(scenario, candidates[-1]).sum())
    raise InfeasibleSensingError(gamma_s, reach)


def optimize(scenario: ScenarioConfig, gamma_s: float, init: Optional[PhaseShifts] = None,
             max_iter: Optional[int] = None, tol: Optional[float] = None) -> ScaState:
    """
    Alternates the minorant phase step and the exact power step until the rate
    gain of a round drops below `tol`, then projects onto unit modulus and
    re-solves the powers.
    """
    max_iter = max_iter or settings.SCA_MAX_ITER
    tol = tol if tol is not None else settings.SCA_TOL
    forms = build_quadratic_forms(scenario)

    phases = _initial_phases(scenario, gamma_s, init)
    alloc, cert = power_subproblem(scenario, phases, gamma_s)
    objective = rate_from_allocation(scenario, phases, alloc)
    state = ScaState(phases=phases, allocation=alloc, certificate=cert, objective=objective, history=[objective])

    for iteration in range(1, max_iter + 1):
        candidate = phase_subproblem(scenario, forms, alloc, phases, gamma_s)
        alloc_next, cert_next = power_subproblem(scenario, candidate, gamma_s)
        value = rate_from_allocation(scenario, candidate, alloc_next)

        if value < objective - ASCENT_TOL * max(1.0, abs(objective)):
            raise OptimizerConsistencyError(
                f"alternating step decreased the rate from {objective:.12g} to {value:.12g}"
            )
        gain = value - objective
        phases, alloc, cert, objective = candidate, alloc_next, cert_next, value
        state.history.append(value)
        state.iteration = iteration
        logger.debug(f"SCA round {iteration}: rate={value:.9f}, gain={gain:.3e}")
        if gain < tol:
            state.converged = True
            break

    state.objective_pre_projection = objective
    projected = phases.projected()
    try:
        alloc, cert = power_subproblem(scenario, projected, gamma_s)
        final_phases = projected
    except InfeasibleSensingError:
        logger.warning("Unit-modulus projection broke the echo constraint; reverting to a closed-form design")
        final_phases = _initial_phases(scenario, gamma_s, None)
        alloc, cert = power_subproblem(scenario, final_phases, gamma_s)

    state.phases = final_phases
    state.allocation = alloc
    state.certificate = cert
    state.objective = rate_from_allocation(scenario, final_phases, alloc)
    logger.info(
        f"SCA finished after {state.iteration} rounds (converged={state.converged}); "
        f"projection changed the rate by {state.projection_loss:.3e} bits/s/Hz"
    )
    return state
