from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field


class Regime(str, Enum):
    SENSING_ACTIVE = "sensing_active"
    COMM_WATERFILL = "comm_waterfill"
    DUAL_CONSTRAINED = "dual_constrained"


class PowerAllocation(BaseModel):
    p_c: Tuple[float, ...] = Field(..., description="Per-subchannel communication powers (W)")
    p_s: float = Field(0.0, ge=0, description="Dedicated sensing power (W)")

    model_config = ConfigDict(frozen=True)

    @property
    def total(self) -> float:
        return float(sum(self.p_c) + self.p_s)

    @staticmethod
    def zeros(k: int) -> "PowerAllocation":
        return PowerAllocation(p_c=(0.0,) * k, p_s=0.0)


class KktCertificate(BaseModel):
    """
    Multipliers of the sensing (mu_star) and dedicated-power (nu_star)
    constraints; lambda_star prices the total budget. Values are in
    natural-log units of the objective.
    """
    regime: Regime
    mu_star: float = Field(..., ge=0)
    nu_star: float = Field(..., ge=0)
    lambda_star: float = Field(..., ge=0)
    sensing_slack: float
    power_slack: float

    model_config = ConfigDict(frozen=True)


class SensingRequirement(BaseModel):
    epsilon: float = Field(..., gt=0, description="CRB target")
    gamma_s: float = Field(..., gt=0, description="Equivalent echo-power threshold")

    model_config = ConfigDict(frozen=True)
