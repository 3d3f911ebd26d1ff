from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional

from app.schemas.experiment import ExperimentName, ResultRow, SchemeName, SearchMode
from app.schemas.scenario import ScenarioConfig
from app.core.units import linear_to_db
from app.services.channel.builder import ScenarioTemplate


@dataclass(frozen=True)
class SweepPoint:
    """One grid point of an experiment, with everything a scheme needs to evaluate it."""
    experiment: ExperimentName
    index: int
    sweep_value: float
    template: ScenarioTemplate
    mode: SearchMode
    k: Optional[int] = None
    epsilon: Optional[float] = None

    def scenario(self, k: Optional[int] = None) -> ScenarioConfig:
        return self.template.first(k or self.k)

    def row(self, scheme: str, rate: float, crb: float, k_used: int,
            feasible: bool = True, regime: str = "") -> ResultRow:
        return ResultRow(
            experiment=self.experiment.value,
            scheme=scheme,
            sweep_value=self.sweep_value,
            rate_bits=rate,
            crb_linear=crb,
            crb_db=linear_to_db(crb),
            regime=regime,
            k_used=k_used,
            feasible=feasible,
        )


class Scheme(ABC):
    """
    A transmission strategy evaluated at sweep points.
    Infeasible points are returned as rows with feasible=False.
    """
    name: SchemeName

    @abstractmethod
    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        """Rows for this point, one per reported variant of the scheme."""
        pass
