import logging
from typing import Dict, List, Optional

from app.core.config import settings
from app.core.units import db_to_linear
from app.schemas.experiment import SWEEPS_OVER_K, SWEEPS_OVER_N, ExperimentName, ExperimentSpec, ResultRow
from app.services.channel.builder import ScenarioTemplate
from app.services.deployment import default_mode
from app.services.experiments.base import Scheme, SweepPoint
from app.services.experiments.factory import SchemeFactory
from app.services.storage import emit_csv, emit_metadata
from app.workers.tasks import map_ordered

logger = logging.getLogger(__name__)


def build_points(spec: ExperimentSpec) -> List[SweepPoint]:
    template = ScenarioTemplate.from_parameters(spec.system)
    mode = spec.mode or default_mode(template)
    fixed_epsilon = db_to_linear(spec.epsilon_db) if spec.epsilon_db is not None else None

    points = []
    for index, value in enumerate(spec.sweep):
        point_template, k, epsilon, sweep_value = template, spec.k, fixed_epsilon, float(value)
        if spec.name in SWEEPS_OVER_K:
            k = int(value)
        elif spec.name in SWEEPS_OVER_N:
            point_template = template.with_elements(int(value))
        elif spec.name == ExperimentName.RATE_VS_INV_CRB:
            epsilon = db_to_linear(value)
            sweep_value = 1.0 / epsilon
        points.append(SweepPoint(
            experiment=spec.name,
            index=index,
            sweep_value=sweep_value,
            template=point_template,
            mode=mode,
            k=k,
            epsilon=epsilon,
        ))
    return points


def skipped_k_values(spec: ExperimentSpec) -> Dict[int, List[int]]:
    """K values the full search leaves out at each element budget of an N sweep."""
    if spec.name not in SWEEPS_OVER_N:
        return {}
    size = spec.system.candidate_count
    return {int(n): [k for k in range(1, size + 1) if int(n) % k] for n in spec.sweep}


def _evaluate_point(point: SweepPoint, schemes: List[Scheme]) -> List[ResultRow]:
    rows = []
    for scheme in schemes:
        rows.extend(scheme.evaluate(point))
    return rows


def run_experiment(spec: ExperimentSpec, max_workers: Optional[int] = None,
                   show_progress: bool = False) -> List[ResultRow]:
    """Rows ordered by sweep index, then by scheme in configuration order."""
    schemes = [SchemeFactory.get_scheme(name, spec) for name in spec.schemes]
    points = build_points(spec)
    logger.info(
        f"Running {spec.name.value}: {len(points)} points, schemes={[s.value for s in spec.schemes]}, seed={spec.seed}"
    )
    per_point = map_ordered(
        lambda point: _evaluate_point(point, schemes),
        points,
        max_workers=max_workers,
        desc=spec.name.value,
        show_progress=show_progress,
    )
    rows = [row for point_rows in per_point for row in point_rows]
    infeasible = sum(not row.feasible for row in rows)
    if infeasible:
        logger.info(f"{infeasible} of {len(rows)} rows miss the sensing requirement")
    return rows


def run(spec: ExperimentSpec, output_path: Optional[str] = None, max_workers: Optional[int] = None,
        show_progress: bool = False) -> List[ResultRow]:
    """Runs the experiment and writes the CSV plus its metadata sidecar."""
    rows = run_experiment(spec, max_workers=max_workers, show_progress=show_progress)
    path = output_path or spec.output_path or f"{settings.OUTPUT_DIR}/{spec.name.value}.csv"
    emit_csv(rows, path)
    emit_metadata(spec, path, skipped_k=skipped_k_values(spec))
    return rows
