from typing import Annotated, List, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from app.core.units import parse_power, parse_ratio_db

Power = Annotated[float, BeforeValidator(parse_power), Field(gt=0)]
Decibel = Annotated[float, BeforeValidator(parse_ratio_db)]
FrequencyAngle = Annotated[float, Field(ge=-1.0, lt=1.0)]
Point = Tuple[float, float]


class IrsSite(BaseModel):
    """
    One reflecting surface. Angles are frequency angles (sin of the physical
    angle under half-wavelength spacing), rho values are amplitude path losses.
    """
    n_elements: int = Field(..., gt=0)
    mu_bi_d: FrequencyAngle
    mu_bi_a: FrequencyAngle
    mu_iu_d: FrequencyAngle
    mu_iu_a: FrequencyAngle
    mu_it_d: FrequencyAngle
    rho_bi: float = Field(..., ge=0)
    rho_iu: float = Field(..., ge=0)
    rho_it: float = Field(..., ge=0)
    is_semi_passive: bool = False

    model_config = ConfigDict(frozen=True)


class ScenarioConfig(BaseModel):
    m_t: int = Field(..., gt=0)
    m_r: int = Field(..., gt=0)
    n_r: int = Field(..., gt=0)
    n_total: int = Field(..., gt=0)
    sites: Tuple[IrsSite, ...]
    p_max: float = Field(..., gt=0, description="Transmit budget in watts")
    sigma2_c: float = Field(..., gt=0, description="CU noise power in watts")
    sigma2_s: float = Field(..., gt=0, description="Sensor noise power in watts")
    t_symbols: int = Field(..., gt=0)
    beta_tilde_sq: float = Field(..., ge=0)
    rho_ts: float = Field(..., ge=0)
    mu_target: FrequencyAngle

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_structure(self) -> "ScenarioConfig":
        if not self.sites:
            raise ValueError("scenario needs at least one IRS site")
        flags = [site.is_semi_passive for site in self.sites]
        if sum(flags) != 1 or not flags[0]:
            raise ValueError("exactly one semi-passive IRS is required and it must be the first site")
        used = sum(site.n_elements for site in self.sites)
        if used > self.n_total:
            raise ValueError(f"sites use {used} elements but the budget is n_total={self.n_total}")
        # Far-field: the sensors see the target along the S-IRS departure direction
        if abs(self.sites[0].mu_it_d - self.mu_target) > 1e-9:
            raise ValueError(
                f"S-IRS mu_it_d={self.sites[0].mu_it_d} must equal mu_target={self.mu_target}"
            )
        return self

    @property
    def k(self) -> int:
        return len(self.sites)

    @property
    def is_colocated(self) -> bool:
        return all(abs(s.mu_iu_d - s.mu_it_d) <= 1e-12 for s in self.sites)


class SitePlacement(BaseModel):
    """
    An IRS given by position. Direct path-loss amplitudes, when present,
    take precedence over the distance-based model.
    """
    position: Point
    rho_bi: Optional[float] = Field(None, ge=0)
    rho_iu: Optional[float] = Field(None, ge=0)
    rho_it: Optional[float] = Field(None, ge=0)


class SystemParameters(BaseModel):
    """
    System-level inputs; every field has the reference simulation default.
    Powers accept "30 dBm" style strings, k0_db accepts "-40 dB".
    """
    m_t: int = Field(32, gt=0)
    m_r: int = Field(8, gt=0)
    n_r: int = Field(8, gt=0)
    t_symbols: int = Field(256, gt=0)
    n_total: int = Field(800, gt=0)
    p_max: Power = 1.0
    sigma2_c: Power = 1e-11
    sigma2_s: Power = 1e-14
    k0_db: Decibel = -40.0
    alpha: float = Field(2.0, ge=0)
    beta_sq: float = Field(1.0, ge=0)
    bs_position: Point = (0.0, 0.0)
    cu_position: Point = (100.0, 0.0)
    target_position: Point = (100.0, 0.0)
    n_candidates: Optional[int] = Field(None, gt=0)
    sites: Optional[List[SitePlacement]] = None
    beta_tilde_sq: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_candidates(self) -> "SystemParameters":
        limit = min(self.m_t, self.m_r)
        if self.n_candidates is not None and self.n_candidates > limit:
            raise ValueError(f"n_candidates={self.n_candidates} exceeds min(m_t, m_r)={limit}")
        if self.sites is not None and not self.sites:
            raise ValueError("sites, when given, must list at least one placement")
        return self

    @property
    def candidate_count(self) -> int:
        if self.sites is not None:
            return len(self.sites)
        return self.n_candidates or min(self.m_t, self.m_r)
