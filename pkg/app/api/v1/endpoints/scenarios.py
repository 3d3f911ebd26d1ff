import logging
import math
from typing import Any

from fastapi import APIRouter, HTTPException

from app.core.exceptions import IsacError
from app.core.units import db_to_linear, linear_to_db
from app.schemas.evaluation import EvaluateRequest, EvaluateResponse
from app.schemas.scenario import SystemParameters
from app.services.channel.builder import ScenarioTemplate
from app.services.deployment import default_mode, evaluate_subset

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/defaults", response_model=SystemParameters)
def read_defaults() -> Any:
    """
    System parameters used when a configuration leaves them out.
    """
    return SystemParameters()


@router.post("/evaluate", response_model=EvaluateResponse)
def evaluate_scenario(request: EvaluateRequest) -> Any:
    """
    Proposed design on the first `k` candidate sites for one CRB target.
    """
    try:
        template = ScenarioTemplate.from_parameters(request.system)
        mode = request.mode or default_mode(template)
        sites = tuple(range(request.k))
        outcome = evaluate_subset(template, sites, db_to_linear(request.epsilon_db), mode)
    except IsacError as e:
        logger.info(f"Rejected evaluation request: {e}")
        raise HTTPException(status_code=400, detail=str(e))

    # inf is not valid JSON
    crb = outcome.crb if math.isfinite(outcome.crb) else None
    return EvaluateResponse(
        k=request.k,
        sites=sites,
        mode=mode,
        rate_bits=outcome.rate,
        crb_linear=crb,
        crb_db=linear_to_db(crb) if crb is not None else None,
        feasible=outcome.feasible,
        regime=outcome.regime,
        allocation=outcome.allocation,
    )
