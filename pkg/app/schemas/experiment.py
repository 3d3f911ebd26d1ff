from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.schemas.allocation import PowerAllocation
from app.schemas.scenario import SystemParameters


class ExperimentName(str, Enum):
    CRB_VS_K = "crb_vs_k"
    CRB_VS_N = "crb_vs_n"
    RATE_VS_INV_CRB = "rate_vs_inv_crb"
    RATE_VS_K = "rate_vs_k"
    RATE_VS_N = "rate_vs_n"
    DOF_SLOPE = "dof_slope"


class SchemeName(str, Enum):
    SENSING_ORIENTED = "sensing_oriented"
    COMM_ORIENTED = "comm_oriented"
    MAX_EIGENMODE = "max_eigenmode"
    PROPOSED = "proposed"
    TIME_SWITCHING = "time_switching"
    FIXED_K = "fixed_k"


class SearchMode(str, Enum):
    CO_LOCATED = "co_located"
    GENERAL = "general"


# Sweep variable per experiment: K, N, epsilon (dB), K, N, K
SWEEP_DEFAULTS: Dict[ExperimentName, List[float]] = {
    ExperimentName.CRB_VS_K: [1, 2, 4, 8],
    ExperimentName.CRB_VS_N: [100, 200, 300, 400, 500, 600, 700, 800, 900, 1000],
    ExperimentName.RATE_VS_INV_CRB: [-20, -24, -28, -32, -36, -40, -44, -48],
    ExperimentName.RATE_VS_K: [1, 2, 4, 5, 8],
    ExperimentName.RATE_VS_N: [200, 400, 600, 800, 1000, 1200, 1400, 1600],
    ExperimentName.DOF_SLOPE: [1, 4, 8],
}

SCHEME_DEFAULTS: Dict[ExperimentName, List[SchemeName]] = {
    ExperimentName.CRB_VS_K: [SchemeName.SENSING_ORIENTED, SchemeName.COMM_ORIENTED, SchemeName.MAX_EIGENMODE],
    ExperimentName.CRB_VS_N: [SchemeName.SENSING_ORIENTED, SchemeName.COMM_ORIENTED, SchemeName.MAX_EIGENMODE],
    ExperimentName.RATE_VS_INV_CRB: [SchemeName.PROPOSED, SchemeName.COMM_ORIENTED, SchemeName.TIME_SWITCHING],
    ExperimentName.RATE_VS_K: [SchemeName.PROPOSED, SchemeName.TIME_SWITCHING],
    ExperimentName.RATE_VS_N: [SchemeName.PROPOSED, SchemeName.TIME_SWITCHING, SchemeName.FIXED_K],
    ExperimentName.DOF_SLOPE: [SchemeName.COMM_ORIENTED],
}

EPSILON_DB_DEFAULTS: Dict[ExperimentName, float] = {
    ExperimentName.RATE_VS_K: -32.0,
    ExperimentName.RATE_VS_N: -42.0,
}

K_DEFAULTS: Dict[ExperimentName, int] = {
    ExperimentName.CRB_VS_N: 4,
    ExperimentName.RATE_VS_INV_CRB: 8,
}

SWEEPS_OVER_K = {ExperimentName.CRB_VS_K, ExperimentName.RATE_VS_K, ExperimentName.DOF_SLOPE}
SWEEPS_OVER_N = {ExperimentName.CRB_VS_N, ExperimentName.RATE_VS_N}
TARGETED_SCHEMES = {SchemeName.PROPOSED, SchemeName.TIME_SWITCHING, SchemeName.FIXED_K}


class ExperimentSpec(BaseModel):
    name: ExperimentName = ExperimentName.CRB_VS_K
    system: SystemParameters = Field(default_factory=SystemParameters)
    sweep: List[float] = Field(default_factory=list)
    schemes: List[SchemeName] = Field(default_factory=list)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    output_path: str = ""
    epsilon_db: Optional[float] = None
    k: Optional[int] = Field(None, gt=0)
    fixed_k_values: List[int] = Field(default_factory=lambda: [1, 8])
    mode: Optional[SearchMode] = None
    power_grid_dbm: List[float] = Field(default_factory=lambda: [40, 50, 60, 70, 80, 90, 100])
    symmetry_shortcut: bool = False

    @model_validator(mode="before")
    @classmethod
    def fill_experiment_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        name = ExperimentName(data.get("name") or ExperimentName.CRB_VS_K)
        data["name"] = name
        if not data.get("sweep"):
            data["sweep"] = list(SWEEP_DEFAULTS[name])
        if not data.get("schemes"):
            data["schemes"] = list(SCHEME_DEFAULTS[name])
        if data.get("epsilon_db") is None and name in EPSILON_DB_DEFAULTS:
            data["epsilon_db"] = EPSILON_DB_DEFAULTS[name]
        if data.get("k") is None and name in K_DEFAULTS:
            data["k"] = K_DEFAULTS[name]
        return data

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentSpec":
        problems = []
        steps = np.diff(np.asarray(self.sweep, dtype=float))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            problems.append(f"sweep must be strictly monotone, got {self.sweep}")

        n_total = self.system.n_total
        k_limit = self.system.candidate_count
        if self.name in SWEEPS_OVER_K:
            for k in self.sweep:
                if k != int(k) or k < 1:
                    problems.append(f"K sweep values must be positive integers, got {k}")
                elif int(k) > k_limit:
                    problems.append(f"K={int(k)} exceeds the {k_limit} candidate sites")
                elif n_total % int(k):
                    problems.append(f"N={n_total} is not divisible by K={int(k)}")
        if self.name in SWEEPS_OVER_N:
            fixed = [self.k] if self.name == ExperimentName.CRB_VS_N else []
            if SchemeName.FIXED_K in self.schemes:
                fixed += self.fixed_k_values
            for n in self.sweep:
                if n != int(n) or n < 1:
                    problems.append(f"N sweep values must be positive integers, got {n}")
                    continue
                for k in fixed:
                    if k is not None and int(n) % k:
                        problems.append(f"N={int(n)} is not divisible by K={k}")
        if self.k is not None:
            if self.k > k_limit:
                problems.append(f"K={self.k} exceeds the {k_limit} candidate sites")
            elif self.name not in SWEEPS_OVER_N and n_total % self.k:
                problems.append(f"N={n_total} is not divisible by K={self.k}")
        if SchemeName.FIXED_K in self.schemes:
            for k in self.fixed_k_values:
                if k < 1 or k > k_limit:
                    problems.append(f"fixed K={k} must lie in [1, {k_limit}]")
        if self.name in (ExperimentName.RATE_VS_K, ExperimentName.RATE_VS_N) and self.epsilon_db is None:
            problems.append(f"{self.name.value} needs epsilon_db")
        elif self.name != ExperimentName.RATE_VS_INV_CRB and self.epsilon_db is None:
            for scheme in [s for s in self.schemes if s in TARGETED_SCHEMES]:
                problems.append(f"scheme {scheme.value} needs epsilon_db")
        if self.name == ExperimentName.DOF_SLOPE:
            for scheme in self.schemes:
                if scheme != SchemeName.COMM_ORIENTED:
                    problems.append(f"dof_slope supports only comm_oriented, got {scheme.value}")
        if self.name not in SWEEPS_OVER_K and self.k is None and self.name != ExperimentName.RATE_VS_N:
            problems.append(f"{self.name.value} needs k")
        if SchemeName.FIXED_K in self.schemes and self.name != ExperimentName.RATE_VS_N:
            problems.append("scheme fixed_k is only defined for rate_vs_n")
        if self.name == ExperimentName.DOF_SLOPE and len(self.power_grid_dbm) < 2:
            problems.append("power_grid_dbm needs at least two points")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class ResultRow(BaseModel):
    """
    One scheme at one sweep value. For time_switching, crb_linear is the
    harmonic blend 1 / (tau / CRB_s + (1 - tau) / CRB_c) of the sensing and
    comm designs, not CRB_s / tau: the comm slots also illuminate the target.
    Setting CRB_c to infinity recovers CRB_s / tau.
    """
    experiment: str
    scheme: str
    sweep_value: float
    rate_bits: float
    crb_linear: float
    crb_db: float
    regime: str = ""
    k_used: int
    feasible: bool

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class DeploymentResult(BaseModel):
    chosen_sites: Tuple[int, ...] = ()
    k_chosen: int = 0
    rate: float = 0.0
    crb_achieved: float = float("inf")
    feasible: bool = False
    per_k_best: Dict[int, float] = Field(default_factory=dict)
    per_k_sites: Dict[int, Tuple[int, ...]] = Field(default_factory=dict)
    skipped_k: List[int] = Field(default_factory=list)
    symmetry_shortcut: bool = False
    regime: Optional[str] = None
    allocation: Optional[PowerAllocation] = None
