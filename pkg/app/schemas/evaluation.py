from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from app.schemas.allocation import PowerAllocation
from app.schemas.experiment import ResultRow, SearchMode
from app.schemas.scenario import SystemParameters


class EvaluateRequest(BaseModel):
    system: SystemParameters = Field(default_factory=SystemParameters)
    k: int = Field(1, gt=0, description="Number of deployed sites, taken in candidate order")
    epsilon_db: float = Field(..., description="CRB target in dB")
    mode: Optional[SearchMode] = None


class EvaluateResponse(BaseModel):
    k: int
    sites: Tuple[int, ...]
    mode: SearchMode
    rate_bits: float
    crb_linear: Optional[float] = None
    crb_db: Optional[float] = None
    feasible: bool
    regime: Optional[str] = None
    allocation: Optional[PowerAllocation] = None


class ValidationResponse(BaseModel):
    valid: bool
    name: Optional[str] = None
    sweep: List[float] = Field(default_factory=list)
    schemes: List[str] = Field(default_factory=list)
    problems: List[str] = Field(default_factory=list)


class ExperimentRunResponse(BaseModel):
    name: str
    seed: int
    rows: List[ResultRow]
    output_path: Optional[str] = None
    meta: Dict[str, Any] = Field(default_factory=dict)
