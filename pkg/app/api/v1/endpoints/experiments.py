import logging
from typing import Any, Dict

from fastapi import APIRouter, Body, HTTPException

from app.core.exceptions import ConfigError, IsacError
from app.schemas.evaluation import ExperimentRunResponse, ValidationResponse
from app.services.config_loader import validate_mapping
from app.services.experiments import run, run_experiment

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/validate", response_model=ValidationResponse)
def validate_experiment(config: Dict[str, Any] = Body(default_factory=dict)) -> Any:
    try:
        spec = validate_mapping(config, "request body")
    except ConfigError as e:
        return ValidationResponse(valid=False, problems=e.problems or [str(e)])
    return ValidationResponse(
        valid=True,
        name=spec.name.value,
        sweep=spec.sweep,
        schemes=[s.value for s in spec.schemes],
    )


@router.post("/run", response_model=ExperimentRunResponse)
def run_experiment_endpoint(config: Dict[str, Any] = Body(default_factory=dict)) -> Any:
    """
    Runs an experiment synchronously. A CSV is written only when the body
    names an `output_path`.
    """
    try:
        spec = validate_mapping(config, "request body")
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=e.problems or [str(e)])

    try:
        if spec.output_path:
            rows = run(spec)
        else:
            rows = run_experiment(spec)
    except IsacError as e:
        logger.error(f"Experiment {spec.name.value} failed: {e}")
        raise HTTPException(status_code=400, detail=str(e))

    return ExperimentRunResponse(
        name=spec.name.value,
        seed=spec.seed,
        rows=rows,
        output_path=spec.output_path or None,
        meta={"schemes": [s.value for s in spec.schemes], "points": len(spec.sweep)},
    )
