import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from app.core.exceptions import ScenarioError
from app.schemas.allocation import PowerAllocation
from app.schemas.scenario import ScenarioConfig
from app.services.channel.geometry import (
    PhaseShifts,
    cascade_vector,
    comm_aligned_phases,
    effective_channel,
    steering,
)
from app.services.sensing.crb import sensing_matrices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubchannelGains:
    """Comm cascade gains |b^H(mu_iu_d) diag(v_k) b(mu_bi_a)|^2, in site order."""
    gains: np.ndarray

    def snr(self, sigma2: float) -> np.ndarray:
        return self.gains / sigma2


def subchannel_gains(scenario: ScenarioConfig, phases: PhaseShifts) -> SubchannelGains:
    phases.validate_for(scenario, unit_modulus=False)
    gains = np.array([
        scenario.m_t * scenario.m_r * (site.rho_bi * site.rho_iu) ** 2
        * abs(cascade_vector(site, site.mu_iu_d) @ v) ** 2
        for site, v in zip(scenario.sites, phases.vectors)
    ])
    return SubchannelGains(gains)


def achievable_rate(h_c: np.ndarray, r_c: np.ndarray, sigma2: float) -> float:
    """log2 det(I + H R H^H / sigma2) in bits/s/Hz."""
    r_c = np.asarray(r_c, dtype=complex)
    hermitian = (r_c + r_c.conj().T) / 2
    if np.linalg.eigvalsh(hermitian).min(initial=0.0) < -1e-9:
        raise ScenarioError("communication covariance is not positive semidefinite")
    gram = np.eye(h_c.shape[0]) + h_c @ hermitian @ h_c.conj().T / sigma2
    sign, logdet = np.linalg.slogdet(gram)
    return float(logdet / np.log(2))


def check_allocation(scenario: ScenarioConfig, alloc: PowerAllocation, tol: float = 1e-12):
    if len(alloc.p_c) != scenario.k:
        raise ScenarioError(f"allocation has {len(alloc.p_c)} streams, scenario has {scenario.k} sites")
    if min(alloc.p_c, default=0.0) < 0 or alloc.p_s < 0:
        raise ScenarioError("allocation contains negative powers")
    if alloc.total > scenario.p_max * (1 + tol):
        raise ScenarioError(f"allocation uses {alloc.total:.12g} W, budget is {scenario.p_max:.12g} W")


def rate_from_allocation(scenario: ScenarioConfig, phases: PhaseShifts, alloc: PowerAllocation) -> float:
    """Sum of per-subchannel rates; the sensing stream carries no data."""
    check_allocation(scenario, alloc)
    snr = subchannel_gains(scenario, phases).snr(scenario.sigma2_c)
    return float(np.sum(np.log2(1.0 + np.asarray(alloc.p_c) * snr)))


def communication_covariance(scenario: ScenarioConfig, alloc: PowerAllocation) -> np.ndarray:
    """Sum of p_c,k a~_B a~_B^H with unit-norm BS departure responses."""
    r_c = np.zeros((scenario.m_t, scenario.m_t), dtype=complex)
    for site, p in zip(scenario.sites, alloc.p_c):
        direction = steering(scenario.m_t, site.mu_bi_d) / np.sqrt(scenario.m_t)
        r_c += p * np.outer(direction, direction.conj())
    return r_c


def transmit_covariance(scenario: ScenarioConfig, phases: PhaseShifts, alloc: PowerAllocation) -> np.ndarray:
    """R_c plus the dedicated sensing beam along the combined echo direction."""
    r_x = communication_covariance(scenario, alloc)
    if alloc.p_s > 0:
        a_b = sensing_matrices(scenario, phases).a_b
        norm_sq = float(np.real(a_b.conj() @ a_b))
        if norm_sq <= 0:
            raise ScenarioError("sensing power assigned but the echo direction vanishes")
        r_x = r_x + alloc.p_s * np.outer(a_b, a_b.conj()) / norm_sq
    return r_x


def waterfill(gains: Sequence[float], p_max: float, sigma2: float, tol: float = 1e-12) -> Tuple[np.ndarray, float]:
    """
    Classic water-filling p_k = (nu - sigma2/g_k)^+ with sum p_k = p_max.
    The level is bracketed by bisection, then recomputed exactly on the active
    set. Streams whose floor equals the level stay inactive.
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.zeros_like(gains)
    usable = gains > 0
    if not np.any(usable) or p_max <= 0:
        return powers, 0.0

    floors = np.full_like(gains, np.inf)
    floors[usable] = sigma2 / gains[usable]

    level_low = float(floors[usable].min())
    level_high = float(floors[usable].max()) + p_max
    while level_high - level_low > tol * max(p_max, level_low):
        level = 0.5 * (level_low + level_high)
        if np.maximum(level - floors, 0.0).sum() > p_max:
            level_high = level
        else:
            level_low = level

    active = floors < level_high
    level = (p_max + floors[active].sum()) / active.sum()
    # Exact recomputation can only shrink the set
    while np.any(active & (floors >= level)):
        active &= floors < level
        level = (p_max + floors[active].sum()) / active.sum()

    powers[active] = level - floors[active]
    return powers, float(level)


def comm_only_optimum(scenario: ScenarioConfig) -> Tuple[PhaseShifts, PowerAllocation, float]:
    """Alignment phases plus water-filling over the resulting subchannels."""
    phases = comm_aligned_phases(scenario)
    gains = subchannel_gains(scenario, phases).gains
    powers, level = waterfill(gains, scenario.p_max, scenario.sigma2_c)
    alloc = PowerAllocation(p_c=tuple(float(p) for p in powers), p_s=0.0)
    rate = rate_from_allocation(scenario, phases, alloc)
    logger.debug(f"Comm-only optimum: level={level:.6g}, rate={rate:.6f} bits/s/Hz")
    return phases, alloc, rate


def multiplexing_dof(scenario: ScenarioConfig, phases: PhaseShifts, power_grid: Sequence[float]) -> float:
    """
    Least-squares slope of the water-filled rate against log2 of the budget.
    `power_grid` is in watts.
    """
    if len(power_grid) < 2:
        raise ScenarioError("multiplexing slope needs at least two power levels")
    gains = subchannel_gains(scenario, phases).gains
    rates = []
    for p_max in power_grid:
        powers, _ = waterfill(gains, p_max, scenario.sigma2_c)
        rates.append(float(np.sum(np.log2(1.0 + powers * gains / scenario.sigma2_c))))
    slope, _ = np.polyfit(np.log2(np.asarray(power_grid, dtype=float)), np.asarray(rates), 1)
    return float(slope)


def rate_of_channel(scenario: ScenarioConfig, phases: PhaseShifts, alloc: PowerAllocation) -> float:
    """log-det rate of the full channel under the constructed covariance."""
    return achievable_rate(effective_channel(scenario, phases), communication_covariance(scenario, alloc), scenario.sigma2_c)
