import logging
from typing import List, Optional, Sequence, Tuple

from scipy.optimize import brentq

from app.core.exceptions import ScenarioError
from app.core.units import dbm_to_watts
from app.schemas.allocation import PowerAllocation
from app.schemas.experiment import ExperimentName, ResultRow, SchemeName
from app.schemas.scenario import ScenarioConfig
from app.services.channel.geometry import sensing_aligned_phases
from app.services.comm.rate import comm_only_optimum, multiplexing_dof, rate_from_allocation, transmit_covariance
from app.services.deployment import evaluate_subset, search
from app.services.experiments.base import Scheme, SweepPoint
from app.services.sensing.crb import crb_general, sensing_covariance

logger = logging.getLogger(__name__)

CRB_RTOL = 1e-9


def sensing_design(scenario: ScenarioConfig) -> float:
    """CRB of the all-sensing design: aligned echo phases, full-power beam on a_b."""
    phases = sensing_aligned_phases(scenario)
    return crb_general(scenario, phases, sensing_covariance(scenario, phases)).crb


def comm_design(scenario: ScenarioConfig) -> Tuple[float, float]:
    """(rate, CRB) of the rate-optimal design that ignores sensing."""
    phases, alloc, rate = comm_only_optimum(scenario)
    crb = crb_general(scenario, phases, transmit_covariance(scenario, phases, alloc)).crb
    return rate, crb


def time_share(crb_sensing: float, crb_comm: float, epsilon: float) -> Optional[float]:
    """
    Smallest fraction tau of the frame spent on the sensing design so that
    1 / (tau / crb_sensing + (1 - tau) / crb_comm) <= epsilon, or None.
    """
    info_s, info_c, target = 1.0 / crb_sensing, 1.0 / crb_comm, 1.0 / epsilon
    if info_c >= target:
        return 0.0
    if info_s < target:
        return None
    return float(brentq(lambda tau: tau * info_s + (1 - tau) * info_c - target, 0.0, 1.0, xtol=1e-15))


def _meets(crb: float, epsilon: Optional[float]) -> bool:
    return epsilon is None or crb <= epsilon * (1 + CRB_RTOL)


class SensingOrientedScheme(Scheme):
    name = SchemeName.SENSING_ORIENTED

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        crb = sensing_design(point.scenario())
        return [point.row(self.name.value, 0.0, crb, point.k, feasible=_meets(crb, point.epsilon))]


class CommOrientedScheme(Scheme):
    name = SchemeName.COMM_ORIENTED

    def __init__(self, power_grid_dbm: Sequence[float] = ()):
        self.power_grid = [dbm_to_watts(p) for p in power_grid_dbm]

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        scenario = point.scenario()
        if point.experiment == ExperimentName.DOF_SLOPE:
            phases, _, _ = comm_only_optimum(scenario)
            slope = multiplexing_dof(scenario, phases, self.power_grid)
            return [point.row(self.name.value, slope, float("nan"), point.k)]
        rate, crb = comm_design(scenario)
        return [point.row(self.name.value, rate, crb, point.k, feasible=_meets(crb, point.epsilon))]


class MaxEigenmodeScheme(Scheme):
    """Sensing-aligned phases with the whole budget on the S-IRS eigenmode."""
    name = SchemeName.MAX_EIGENMODE

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        scenario = point.scenario()
        phases = sensing_aligned_phases(scenario)
        alloc = PowerAllocation(p_c=(scenario.p_max,) + (0.0,) * (scenario.k - 1), p_s=0.0)
        crb = crb_general(scenario, phases, transmit_covariance(scenario, phases, alloc)).crb
        rate = rate_from_allocation(scenario, phases, alloc)
        return [point.row(self.name.value, rate, crb, point.k, feasible=_meets(crb, point.epsilon))]


class ProposedScheme(Scheme):
    """
    Jointly optimized powers and phases. A fixed K evaluates the first K
    sites; rate_vs_k searches subsets of each K; rate_vs_n searches every K.
    """
    name = SchemeName.PROPOSED

    def __init__(self, symmetry_shortcut: bool = False):
        self.symmetry_shortcut = symmetry_shortcut

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        if point.experiment == ExperimentName.RATE_VS_INV_CRB:
            outcome = evaluate_subset(point.template, tuple(range(point.k)), point.epsilon, point.mode)
            return [point.row(self.name.value, outcome.rate, outcome.crb, point.k,
                              feasible=outcome.feasible, regime=outcome.regime or "")]

        k_values = [point.k] if point.k else None
        return [self._searched(point, self.name.value, k_values)]

    def _searched(self, point: SweepPoint, label: str, k_values: Optional[List[int]]) -> ResultRow:
        result = search(point.template, point.epsilon, point.mode, k_values=k_values,
                        symmetry_shortcut=self.symmetry_shortcut, max_workers=1)
        if not result.feasible:
            return point.row(label, 0.0, float("inf"), k_values[0] if k_values else 0, feasible=False)
        return point.row(label, result.rate, result.crb_achieved, result.k_chosen, regime=result.regime or "")


class FixedKScheme(ProposedScheme):
    """Proposed design restricted to each configured K, one row per K."""
    name = SchemeName.FIXED_K

    def __init__(self, k_values: Sequence[int], symmetry_shortcut: bool = False):
        super().__init__(symmetry_shortcut)
        self.k_values = list(k_values)

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        return [self._searched(point, f"{self.name.value}{k}", [k]) for k in self.k_values]


class TimeSwitchingScheme(Scheme):
    """
    Alternates the sensing design and the comm-only design over the frame.
    Fisher information adds over time, so the CRB of the mix is the harmonic
    blend of the two and the rate scales with the comm share.
    """
    name = SchemeName.TIME_SWITCHING

    def evaluate(self, point: SweepPoint) -> List[ResultRow]:
        if point.epsilon is None:
            raise ScenarioError("time switching needs a CRB target")
        k_values = [point.k] if point.k else self._dividing_k(point)

        best = None
        for k in k_values:
            row = self._at(point, k)
            if best is None or (row.feasible and (not best.feasible or row.rate_bits > best.rate_bits)):
                best = row
        return [best]

    @staticmethod
    def _dividing_k(point: SweepPoint) -> List[int]:
        n_total = point.template.params.n_total
        return [k for k in range(1, point.template.size + 1) if n_total % k == 0]

    def _at(self, point: SweepPoint, k: int) -> ResultRow:
        scenario = point.scenario(k)
        crb_s = sensing_design(scenario)
        rate_c, crb_c = comm_design(scenario)
        tau = time_share(crb_s, crb_c, point.epsilon)
        if tau is None:
            logger.debug(f"Time switching infeasible at K={k}: sensing-only CRB {crb_s:.6g}")
            return point.row(self.name.value, 0.0, crb_s, k, feasible=False)
        crb = 1.0 / (tau / crb_s + (1 - tau) / crb_c)
        return point.row(self.name.value, (1 - tau) * rate_c, crb, k, feasible=_meets(crb, point.epsilon))
