import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ScenarioError
from app.schemas.scenario import IrsSite, ScenarioConfig, SitePlacement, SystemParameters
from app.services.channel.geometry import candidate_angles, path_loss_amplitude

logger = logging.getLogger(__name__)

# Array axes: BS and CU arrays lie along y (boresight on the BS-CU line),
# every IRS lies along x.
_BS_AXIS = np.array([0.0, 1.0])
_CU_AXIS = np.array([0.0, 1.0])
_IRS_AXIS = np.array([1.0, 0.0])


def _unit(vector: np.ndarray) -> Tuple[np.ndarray, float]:
    distance = float(np.linalg.norm(vector))
    if distance <= 0:
        raise ScenarioError("two nodes share the same position")
    return vector / distance, distance


def _clip_angle(mu: float) -> float:
    return float(np.clip(mu, -1.0, np.nextafter(1.0, 0.0)))


def triangulate(bs: np.ndarray, cu: np.ndarray, mu_bi_d: float, mu_iu_a: float) -> np.ndarray:
    """
    Position seen from the BS under mu_bi_d and from the CU under mu_iu_a.
    The BS looks toward +x and the CU back toward -x.
    """
    theta_b, theta_u = np.arcsin(mu_bi_d), np.arcsin(mu_iu_a)
    from_bs = np.array([np.cos(theta_b), np.sin(theta_b)])
    from_cu = np.array([-np.cos(theta_u), np.sin(theta_u)])
    try:
        ranges = np.linalg.solve(np.column_stack([from_bs, -from_cu]), cu - bs)
    except np.linalg.LinAlgError:
        raise ScenarioError(f"angle pair ({mu_bi_d}, {mu_iu_a}) gives parallel rays")
    if np.any(ranges <= 0):
        raise ScenarioError(f"angle pair ({mu_bi_d}, {mu_iu_a}) does not intersect between BS and CU")
    return bs + ranges[0] * from_bs


@dataclass(frozen=True)
class SiteGeometry:
    position: Tuple[float, float]
    mu_bi_d: float
    mu_bi_a: float
    mu_iu_d: float
    mu_iu_a: float
    mu_it_d: float
    rho_bi: float
    rho_iu: float
    rho_it: float

    def to_site(self, n_elements: int, is_semi_passive: bool) -> IrsSite:
        return IrsSite(
            n_elements=n_elements,
            mu_bi_d=self.mu_bi_d,
            mu_bi_a=self.mu_bi_a,
            mu_iu_d=self.mu_iu_d,
            mu_iu_a=self.mu_iu_a,
            mu_it_d=self.mu_it_d,
            rho_bi=self.rho_bi,
            rho_iu=self.rho_iu,
            rho_it=self.rho_it,
            is_semi_passive=is_semi_passive,
        )


class ScenarioTemplate:
    """
    Candidate deployment sites plus system parameters. Concrete scenarios are
    cut from it per subset with the element budget split evenly.
    """

    def __init__(self, params: SystemParameters, candidates: Sequence[SiteGeometry]):
        if not candidates:
            raise ScenarioError("scenario template needs at least one candidate site")
        self.params = params
        self.candidates: Tuple[SiteGeometry, ...] = tuple(candidates)

    @classmethod
    def from_parameters(cls, params: SystemParameters) -> "ScenarioTemplate":
        bs = np.asarray(params.bs_position, dtype=float)
        cu = np.asarray(params.cu_position, dtype=float)

        placements: List[SitePlacement] = params.sites or []
        if not placements:
            for mu_bi_d, mu_iu_a in candidate_angles(params.m_t, params.m_r, params.candidate_count):
                position = triangulate(bs, cu, mu_bi_d, mu_iu_a)
                placements.append(SitePlacement(position=(float(position[0]), float(position[1]))))

        candidates = [cls._locate(params, placement) for placement in placements]
        logger.debug(f"Built {len(candidates)} candidate sites")
        return cls(params, candidates)

    @staticmethod
    def _locate(params: SystemParameters, placement: SitePlacement) -> SiteGeometry:
        bs = np.asarray(params.bs_position, dtype=float)
        cu = np.asarray(params.cu_position, dtype=float)
        target = np.asarray(params.target_position, dtype=float)
        irs = np.asarray(placement.position, dtype=float)

        bs_to_irs, d_bi = _unit(irs - bs)
        cu_to_irs, d_iu = _unit(irs - cu)
        irs_to_target, d_it = _unit(target - irs)

        def loss(distance: float, override: Optional[float]) -> float:
            if override is not None:
                return override
            return path_loss_amplitude(distance, params.alpha, params.k0_db)

        return SiteGeometry(
            position=(float(irs[0]), float(irs[1])),
            mu_bi_d=_clip_angle(bs_to_irs @ _BS_AXIS),
            mu_bi_a=_clip_angle(-bs_to_irs @ _IRS_AXIS),
            mu_iu_d=_clip_angle(-cu_to_irs @ _IRS_AXIS),
            mu_iu_a=_clip_angle(cu_to_irs @ _CU_AXIS),
            mu_it_d=_clip_angle(irs_to_target @ _IRS_AXIS),
            rho_bi=loss(d_bi, placement.rho_bi),
            rho_iu=loss(d_iu, placement.rho_iu),
            rho_it=loss(d_it, placement.rho_it),
        )

    @property
    def size(self) -> int:
        return len(self.candidates)

    def subset(self, indices: Sequence[int], n_total: Optional[int] = None) -> ScenarioConfig:
        """
        Equal-split scenario over the given candidate indices. The S-IRS
        (candidate 0) must be part of every subset and is placed first.
        """
        n_total = n_total or self.params.n_total
        chosen = sorted(set(int(i) for i in indices))
        if not chosen or chosen[0] != 0:
            raise ScenarioError(f"subset {tuple(indices)} must contain the semi-passive site 0")
        if chosen[-1] >= self.size:
            raise ScenarioError(f"subset {tuple(indices)} refers to a site outside the {self.size} candidates")
        k = len(chosen)
        if n_total % k:
            raise ScenarioError(f"N={n_total} is not divisible by K={k}")

        geometries = [self.candidates[i] for i in chosen]
        sites = tuple(g.to_site(n_total // k, is_semi_passive=(i == 0)) for i, g in zip(chosen, geometries))
        anchor = geometries[0]

        beta_tilde_sq = self.params.beta_tilde_sq
        if beta_tilde_sq is None:
            beta_tilde_sq = self.params.beta_sq * anchor.rho_it ** 2 * max(g.rho_it ** 2 for g in geometries)

        return ScenarioConfig(
            m_t=self.params.m_t,
            m_r=self.params.m_r,
            n_r=self.params.n_r,
            n_total=n_total,
            sites=sites,
            p_max=self.params.p_max,
            sigma2_c=self.params.sigma2_c,
            sigma2_s=self.params.sigma2_s,
            t_symbols=self.params.t_symbols,
            beta_tilde_sq=beta_tilde_sq,
            rho_ts=anchor.rho_it,
            mu_target=anchor.mu_it_d,
        )

    def with_elements(self, n_total: int) -> "ScenarioTemplate":
        """Same candidate sites under a different element budget."""
        return ScenarioTemplate(self.params.model_copy(update={"n_total": n_total}), self.candidates)

    def first(self, k: int, n_total: Optional[int] = None) -> ScenarioConfig:
        return self.subset(range(k), n_total)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        """True when every candidate shares the same path-loss amplitudes."""
        reference = self.candidates[0]
        return all(
            abs(c.rho_bi - reference.rho_bi) <= tol * reference.rho_bi
            and abs(c.rho_iu - reference.rho_iu) <= tol * reference.rho_iu
            and abs(c.rho_it - reference.rho_it) <= tol * reference.rho_it
            for c in self.candidates
        )
