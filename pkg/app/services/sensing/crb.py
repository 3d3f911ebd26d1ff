import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.exceptions import ScenarioError
from app.schemas.scenario import ScenarioConfig
from app.schemas.sensing import CrbMethod, CrbReport, FisherBlocks
from app.services.channel.geometry import (
    PhaseShifts,
    cascade_vector,
    steering,
    steering_derivative,
    steering_derivative_norm_sq,
    with_sensing_anchor,
)

logger = logging.getLogger(__name__)

DEGENERATE_FLOOR = 1e-300
FD_STEP = 1e-6


@dataclass(frozen=True)
class SensingMatrices:
    """
    Response of the sensor array to the transmit covariance, A(mu_T), its
    angle derivative, and the per-site echo cascade gains.
    `a_b` is the combined transmit direction: A = a_s a_b^H.
    """
    a_mat: np.ndarray
    a_dot_mat: np.ndarray
    gamma_s: np.ndarray
    gamma_tilde_1: complex
    a_b: np.ndarray


def _echo_departure(scenario: ScenarioConfig, index: int) -> float:
    return scenario.mu_target if index == 0 else scenario.sites[index].mu_it_d


def sensing_matrices(scenario: ScenarioConfig, phases: PhaseShifts) -> SensingMatrices:
    phases.validate_for(scenario, unit_modulus=False)

    gamma_s = np.array([
        cascade_vector(site, _echo_departure(scenario, k)) @ v
        for k, (site, v) in enumerate(zip(scenario.sites, phases.vectors))
    ])
    anchor = scenario.sites[0]
    derivative_cascade = (
        steering_derivative(anchor.n_elements, scenario.mu_target).conj()
        * steering(anchor.n_elements, anchor.mu_bi_a)
    )
    gamma_tilde_1 = complex(derivative_cascade @ phases.vectors[0])

    a_b = np.zeros(scenario.m_t, dtype=complex)
    for site, gamma in zip(scenario.sites, gamma_s):
        a_b += site.rho_bi * np.conj(gamma) * steering(scenario.m_t, site.mu_bi_d)

    a_s = steering(scenario.n_r, scenario.mu_target)
    a_s_dot = steering_derivative(scenario.n_r, scenario.mu_target)
    a_mat = np.outer(a_s, a_b.conj())
    a_dot_mat = np.outer(a_s_dot, a_b.conj()) + anchor.rho_bi * gamma_tilde_1 * np.outer(
        a_s, steering(scenario.m_t, anchor.mu_bi_d).conj()
    )
    return SensingMatrices(a_mat, a_dot_mat, gamma_s, gamma_tilde_1, a_b)


def check_covariance(scenario: ScenarioConfig, r_x: np.ndarray, tol: float = 1e-9):
    r_x = np.asarray(r_x)
    if r_x.shape != (scenario.m_t, scenario.m_t):
        raise ScenarioError(f"covariance has shape {r_x.shape}, expected ({scenario.m_t}, {scenario.m_t})")
    scale = max(scenario.p_max, float(np.abs(r_x).max(initial=0.0)))
    if np.abs(r_x - r_x.conj().T).max(initial=0.0) > tol * scale:
        raise ScenarioError("covariance is not Hermitian")
    if np.linalg.eigvalsh((r_x + r_x.conj().T) / 2).min() < -tol * scale:
        raise ScenarioError("covariance is not positive semidefinite")
    if np.trace(r_x).real > scenario.p_max * (1 + tol):
        raise ScenarioError(f"covariance trace {np.trace(r_x).real:.6g} exceeds p_max={scenario.p_max:.6g}")


def _fisher_blocks(scenario: ScenarioConfig, a_mat: np.ndarray, a_dot_mat: np.ndarray, r_x: np.ndarray) -> FisherBlocks:
    scale = 2.0 * scenario.t_symbols / scenario.sigma2_s
    beta = np.sqrt(scenario.beta_tilde_sq)
    cross = np.trace(a_mat @ r_x @ a_dot_mat.conj().T)
    weighted = beta * cross
    return FisherBlocks(
        f_mu_mu=float(scale * beta ** 2 * np.trace(a_dot_mat @ r_x @ a_dot_mat.conj().T).real),
        f_mu_beta=scale * np.array([weighted.real, (1j * weighted).real]),
        f_beta_beta=scale * np.trace(a_mat @ r_x @ a_mat.conj().T).real * np.eye(2),
    )


def crb_general(scenario: ScenarioConfig, phases: PhaseShifts, r_x: np.ndarray) -> CrbReport:
    r_x = np.asarray(r_x, dtype=complex)
    check_covariance(scenario, r_x)
    matrices = sensing_matrices(scenario, phases)
    a_mat, a_dot = matrices.a_mat, matrices.a_dot_mat

    direct = np.trace(a_dot @ r_x @ a_dot.conj().T).real
    power = np.trace(a_mat @ r_x @ a_mat.conj().T).real
    blocks = _fisher_blocks(scenario, a_mat, a_dot, r_x)
    if power <= DEGENERATE_FLOOR or scenario.beta_tilde_sq <= 0:
        return CrbReport(crb=float("inf"), method=CrbMethod.GENERAL, blocks=blocks)

    cross = np.trace(a_mat @ r_x @ a_dot.conj().T)
    denominator = direct - abs(cross) ** 2 / power
    if denominator <= DEGENERATE_FLOOR:
        return CrbReport(crb=float("inf"), method=CrbMethod.GENERAL, blocks=blocks)

    crb = scenario.sigma2_s / (2 * scenario.t_symbols * scenario.beta_tilde_sq * denominator)
    return CrbReport(crb=float(crb), method=CrbMethod.GENERAL, blocks=blocks)


def sensing_gain(matrices: SensingMatrices, r_x: np.ndarray) -> float:
    """a_b^H R a_b, the echo power the sensing constraint compares to Gamma_s."""
    return float(np.real(matrices.a_b.conj() @ r_x @ matrices.a_b))


def crb_special(scenario: ScenarioConfig, phases_passive: PhaseShifts, r_x: np.ndarray) -> CrbReport:
    """
    CRB with the S-IRS phases fixed so that the derivative cascade cancels.
    Only the passive sites' phases are taken from `phases_passive`.
    """
    r_x = np.asarray(r_x, dtype=complex)
    check_covariance(scenario, r_x)
    matrices = sensing_matrices(scenario, with_sensing_anchor(scenario, phases_passive))
    gain = sensing_gain(matrices, r_x)
    denominator = steering_derivative_norm_sq(scenario.n_r) * gain
    if denominator <= DEGENERATE_FLOOR or scenario.beta_tilde_sq <= 0:
        return CrbReport(crb=float("inf"), method=CrbMethod.SPECIAL)
    crb = scenario.sigma2_s / (2 * scenario.t_symbols * scenario.beta_tilde_sq * denominator)
    return CrbReport(crb=float(crb), method=CrbMethod.SPECIAL)


def aligned_echo_gain(scenario: ScenarioConfig) -> float:
    """M_t * sum_k rho_bi,k^2 N_k^2: the all-sensing echo power per watt."""
    return float(scenario.m_t * sum(s.rho_bi ** 2 * s.n_elements ** 2 for s in scenario.sites))


def crb_aligned(scenario: ScenarioConfig) -> CrbReport:
    denominator = (
        2 * scenario.t_symbols * scenario.beta_tilde_sq * scenario.p_max
        * steering_derivative_norm_sq(scenario.n_r) * aligned_echo_gain(scenario)
    )
    if denominator <= DEGENERATE_FLOOR:
        return CrbReport(crb=float("inf"), method=CrbMethod.ALIGNED)
    return CrbReport(crb=float(scenario.sigma2_s / denominator), method=CrbMethod.ALIGNED)


def crb_asymptotic(scenario: ScenarioConfig, k: Optional[int] = None) -> float:
    """
    Large-array law with power P/K and N/K elements on each of the first k
    sites, all phases aligned to the CU:
    6 sigma_s^2 K^3 / (T |beta|^2 pi^2 (N_r^3 - N_r) M_t P N^2 sum rho_bi^2).
    """
    if scenario.n_r < 2:
        raise ScenarioError(f"asymptotic CRB needs at least two sensors, got n_r={scenario.n_r}")
    k = k or scenario.k
    if k > scenario.k:
        raise ScenarioError(f"k={k} exceeds the {scenario.k} sites of the scenario")
    path_gain = sum(s.rho_bi ** 2 for s in scenario.sites[:k])
    denominator = (
        scenario.t_symbols * scenario.beta_tilde_sq * np.pi ** 2 * (scenario.n_r ** 3 - scenario.n_r)
        * scenario.m_t * scenario.p_max * scenario.n_total ** 2 * path_gain
    )
    if denominator <= DEGENERATE_FLOOR:
        return float("inf")
    return float(6 * scenario.sigma2_s * k ** 3 / denominator)


def _response_at(scenario: ScenarioConfig, phases: PhaseShifts, mu: float) -> np.ndarray:
    """A(mu) assembled from the per-site channel matrices G_k."""
    row = np.zeros(scenario.m_t, dtype=complex)
    for k, (site, v) in enumerate(zip(scenario.sites, phases.vectors)):
        g_k = site.rho_bi * np.outer(steering(site.n_elements, site.mu_bi_a), steering(scenario.m_t, site.mu_bi_d).conj())
        departure = mu if k == 0 else site.mu_it_d
        row += steering(site.n_elements, departure).conj() @ (v[:, None] * g_k)
    return np.outer(steering(scenario.n_r, mu), row)


def crb_numeric_oracle(scenario: ScenarioConfig, phases: PhaseShifts, r_x: np.ndarray) -> CrbReport:
    """
    Independent evaluation: central differences of A over mu_T, the three
    Fisher blocks, and the inverse of the Schur complement on the angle.
    """
    r_x = np.asarray(r_x, dtype=complex)
    check_covariance(scenario, r_x)
    phases.validate_for(scenario, unit_modulus=False)
    mu = scenario.mu_target
    a_mat = _response_at(scenario, phases, mu)
    a_dot = (_response_at(scenario, phases, mu + FD_STEP) - _response_at(scenario, phases, mu - FD_STEP)) / (2 * FD_STEP)

    blocks = _fisher_blocks(scenario, a_mat, a_dot, r_x)
    information = blocks.schur
    if information <= DEGENERATE_FLOOR or blocks.f_beta_beta[0, 0] <= DEGENERATE_FLOOR:
        return CrbReport(crb=float("inf"), method=CrbMethod.NUMERIC_ORACLE, blocks=blocks)
    return CrbReport(crb=float(1.0 / information), method=CrbMethod.NUMERIC_ORACLE, blocks=blocks)


def sensing_covariance(scenario: ScenarioConfig, phases: PhaseShifts) -> np.ndarray:
    """Full-power rank-one beam along a_b, the maximizer of a_b^H R a_b."""
    a_b = sensing_matrices(scenario, phases).a_b
    norm_sq = float(np.real(a_b.conj() @ a_b))
    if norm_sq <= DEGENERATE_FLOOR:
        raise ScenarioError("sensing direction vanishes: every echo cascade gain is zero")
    return scenario.p_max * np.outer(a_b, a_b.conj()) / norm_sq


def sensing_coefficients(scenario: ScenarioConfig, phases: PhaseShifts) -> np.ndarray:
    """Per-stream echo gains M_t rho_bi,k^2 times the echo cascade gain."""
    gamma = sensing_matrices(scenario, phases).gamma_s
    rho = np.array([s.rho_bi for s in scenario.sites])
    return scenario.m_t * rho ** 2 * np.abs(gamma) ** 2
