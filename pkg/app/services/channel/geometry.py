import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.core.exceptions import ScenarioError
from app.core.units import db_to_linear
from app.schemas.scenario import IrsSite, ScenarioConfig

logger = logging.getLogger(__name__)


def _centered_indices(count: int) -> np.ndarray:
    return np.arange(count) - (count - 1) / 2.0


def steering(count: int, x: float) -> np.ndarray:
    """
    Centered half-wavelength ULA response: entry m is
    exp(j*pi*(m - (M-1)/2)*x), so every entry has unit modulus.
    """
    if count < 1:
        raise ScenarioError(f"steering vector needs at least one element, got {count}")
    return np.exp(1j * np.pi * _centered_indices(count) * x)


def steering_derivative(count: int, x: float) -> np.ndarray:
    if count < 1:
        raise ScenarioError(f"steering vector needs at least one element, got {count}")
    m = _centered_indices(count)
    return 1j * np.pi * m * np.exp(1j * np.pi * m * x)


def steering_derivative_norm_sq(count: int) -> float:
    return float(np.pi ** 2 * (count ** 3 - count) / 12.0)


def path_loss_amplitude(distance: float, alpha: float, k0_db: float) -> float:
    if distance <= 0:
        raise ScenarioError(f"distance must be positive, got {distance}")
    return float(np.sqrt(db_to_linear(k0_db) * distance ** (-alpha)))


def candidate_angles(m_t: int, m_r: int, k_max: int) -> List[Tuple[float, float]]:
    """
    Angle pairs (mu_bi_d, mu_iu_a) on the orthogonal grids 2/m_t and 2/m_r.

    Both grids are centred on zero so every pair has matching signs and can be
    triangulated between the BS and the CU. Pairs are ordered innermost first,
    positive before negative, so the first pair is a natural sensing anchor.
    """
    limit = min(m_t, m_r)
    if k_max < 1 or k_max > limit:
        raise ScenarioError(f"k_max={k_max} must lie in [1, min(m_t, m_r)={limit}]")

    offsets = 2 * np.arange(k_max) - (k_max - 1)
    order = sorted(range(k_max), key=lambda i: (abs(offsets[i]), -offsets[i]))
    return [(float(offsets[i] / m_t), float(offsets[i] / m_r)) for i in order]


def verify_orthogonality(scenario: ScenarioConfig) -> float:
    """
    Largest normalized cross inner product between the BS-side departure
    responses and between the CU-side arrival responses of distinct sites.
    """
    if scenario.k < 2:
        return 0.0

    bs = np.stack([steering(scenario.m_t, s.mu_bi_d) for s in scenario.sites]) / np.sqrt(scenario.m_t)
    cu = np.stack([steering(scenario.m_r, s.mu_iu_a) for s in scenario.sites]) / np.sqrt(scenario.m_r)

    worst = 0.0
    for gram in (bs.conj() @ bs.T, cu.conj() @ cu.T):
        off_diagonal = np.abs(gram - np.diag(np.diag(gram)))
        worst = max(worst, float(off_diagonal.max()))
    return worst


@dataclass(frozen=True)
class PhaseShifts:
    """Per-site reflection vectors v_k = diag(Theta_k)."""
    vectors: Tuple[np.ndarray, ...]

    @staticmethod
    def from_list(vectors: Sequence[np.ndarray]) -> "PhaseShifts":
        return PhaseShifts(tuple(np.asarray(v, dtype=complex).copy() for v in vectors))

    def validate_for(self, scenario: ScenarioConfig, unit_modulus: bool = True, tol: float = 1e-9):
        if len(self.vectors) != scenario.k:
            raise ScenarioError(f"expected {scenario.k} phase vectors, got {len(self.vectors)}")
        for index, (v, site) in enumerate(zip(self.vectors, scenario.sites)):
            if v.shape != (site.n_elements,):
                raise ScenarioError(
                    f"site {index}: phase vector has shape {v.shape}, expected ({site.n_elements},)"
                )
            magnitude = np.abs(v)
            if unit_modulus and np.any(np.abs(magnitude - 1.0) > tol):
                raise ScenarioError(f"site {index}: phase shifts are not unit modulus")
            if not unit_modulus and np.any(magnitude > 1.0 + tol):
                raise ScenarioError(f"site {index}: reflection coefficient outside the unit disc")

    def projected(self) -> "PhaseShifts":
        """Maps every entry onto the unit circle; zero entries become 1."""
        projected = []
        for v in self.vectors:
            magnitude = np.abs(v)
            unit = np.ones_like(v)
            nonzero = magnitude > 0
            unit[nonzero] = v[nonzero] / magnitude[nonzero]
            projected.append(unit)
        return PhaseShifts(tuple(projected))

    def rotated(self, angles: Sequence[float]) -> "PhaseShifts":
        return PhaseShifts(tuple(v * np.exp(1j * a) for v, a in zip(self.vectors, angles)))


def cascade_vector(site: IrsSite, departure: float) -> np.ndarray:
    """Entries conj(b(departure))_n * b(mu_bi_a)_n, so b^H(dep) diag(v) b(arr) = cascade @ v."""
    return steering(site.n_elements, departure).conj() * steering(site.n_elements, site.mu_bi_a)


def _align(cascade: np.ndarray) -> np.ndarray:
    return np.exp(-1j * np.angle(cascade))


def comm_aligned_phases(scenario: ScenarioConfig) -> PhaseShifts:
    return PhaseShifts(tuple(_align(cascade_vector(s, s.mu_iu_d)) for s in scenario.sites))


def sensing_aligned_phases(scenario: ScenarioConfig) -> PhaseShifts:
    return PhaseShifts(tuple(_align(cascade_vector(s, s.mu_it_d)) for s in scenario.sites))


def with_sensing_anchor(scenario: ScenarioConfig, phases: PhaseShifts) -> PhaseShifts:
    """Replaces the S-IRS phases by the ones that cancel the angle-derivative gain."""
    anchor = _align(cascade_vector(scenario.sites[0], scenario.mu_target))
    return PhaseShifts((anchor,) + tuple(phases.vectors[1:]))


def random_phases(scenario: ScenarioConfig, rng: np.random.Generator) -> PhaseShifts:
    return PhaseShifts(tuple(
        np.exp(1j * rng.uniform(0, 2 * np.pi, s.n_elements)) for s in scenario.sites
    ))


def effective_channel(scenario: ScenarioConfig, phases: PhaseShifts) -> np.ndarray:
    """
    BS-to-CU channel through all surfaces, sum_k H_r,k Theta_k G_k.
    Each term is rank one: rho_iu a_U (b^H Theta b) rho_bi a_B^H.
    """
    phases.validate_for(scenario, unit_modulus=False)
    h_c = np.zeros((scenario.m_r, scenario.m_t), dtype=complex)
    for site, v in zip(scenario.sites, phases.vectors):
        coupling = site.rho_iu * site.rho_bi * (cascade_vector(site, site.mu_iu_d) @ v)
        h_c += coupling * np.outer(steering(scenario.m_r, site.mu_iu_a), steering(scenario.m_t, site.mu_bi_d).conj())
    return h_c
