import logging
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

from app.core.exceptions import InfeasibleSensingError, ScenarioError
from app.schemas.allocation import KktCertificate, PowerAllocation
from app.schemas.experiment import DeploymentResult, SearchMode
from app.schemas.scenario import ScenarioConfig
from app.services.allocation import sca
from app.services.allocation.power import gamma_from_epsilon, solve_colocated
from app.services.channel.builder import ScenarioTemplate
from app.services.channel.geometry import PhaseShifts, comm_aligned_phases
from app.services.comm.rate import rate_from_allocation, transmit_covariance
from app.services.sensing.crb import crb_general
from app.workers.tasks import map_ordered

logger = logging.getLogger(__name__)

CRB_RTOL = 1e-9


@dataclass
class SubsetOutcome:
    sites: Tuple[int, ...]
    rate: float
    crb: float
    feasible: bool
    phases: Optional[PhaseShifts] = None
    allocation: Optional[PowerAllocation] = None
    certificate: Optional[KktCertificate] = None

    @property
    def regime(self) -> Optional[str]:
        return self.certificate.regime.value if self.certificate else None


def subsets_with_anchor(size: int, k: int) -> List[Tuple[int, ...]]:
    """Every k-subset of range(size) containing site 0, lexicographic."""
    if k < 1 or k > size:
        return []
    return [(0,) + rest for rest in combinations(range(1, size), k - 1)]


def design_for(scenario: ScenarioConfig, gamma_s: float, mode: SearchMode) -> Tuple[PhaseShifts, PowerAllocation, KktCertificate]:
    """Inner problem: phases and powers maximizing the rate under the echo threshold."""
    if mode == SearchMode.CO_LOCATED:
        alloc, cert = solve_colocated(scenario, gamma_s)
        return comm_aligned_phases(scenario), alloc, cert
    state = sca.optimize(scenario, gamma_s)
    return state.phases, state.allocation, state.certificate


def evaluate_subset(template: ScenarioTemplate, sites: Sequence[int], epsilon: float,
                    mode: SearchMode) -> SubsetOutcome:
    scenario = template.subset(sites)
    gamma_s = gamma_from_epsilon(scenario, epsilon).gamma_s
    try:
        phases, alloc, cert = design_for(scenario, gamma_s, mode)
    except InfeasibleSensingError as e:
        logger.debug(f"Subset {tuple(sites)} infeasible: {e}")
        return SubsetOutcome(sites=tuple(sites), rate=0.0, crb=float("inf"), feasible=False)

    crb = crb_general(scenario, phases, transmit_covariance(scenario, phases, alloc)).crb
    feasible = crb <= epsilon * (1 + CRB_RTOL)
    if not feasible:
        logger.warning(f"Subset {tuple(sites)}: design CRB {crb:.6g} misses epsilon={epsilon:.6g}")
    return SubsetOutcome(
        sites=tuple(sites),
        rate=rate_from_allocation(scenario, phases, alloc),
        crb=crb,
        feasible=feasible,
        phases=phases,
        allocation=alloc,
        certificate=cert,
    )


def default_mode(template: ScenarioTemplate) -> SearchMode:
    params = template.params
    if tuple(params.cu_position) == tuple(params.target_position):
        return SearchMode.CO_LOCATED
    return SearchMode.GENERAL


def search(
    template: ScenarioTemplate,
    epsilon: float,
    mode: Optional[SearchMode] = None,
    k_values: Optional[Sequence[int]] = None,
    symmetry_shortcut: bool = False,
    max_workers: Optional[int] = None,
) -> DeploymentResult:
    """
    Rate-maximizing deployment over subsets of the candidate sites that
    contain the semi-passive site. Ties go to the smallest K, then the
    lexicographically smallest subset.
    """
    if template.size == 0:
        raise ScenarioError("deployment search needs at least one candidate site")
    mode = mode or default_mode(template)
    n_total = template.params.n_total
    k_values = sorted(set(k_values or range(1, template.size + 1)))

    shortcut = symmetry_shortcut and template.is_symmetric()
    if symmetry_shortcut and not shortcut:
        logger.warning("Symmetry shortcut requested but candidate path losses differ; searching every subset")

    skipped: List[int] = []
    jobs: List[Tuple[int, ...]] = []
    for k in k_values:
        if k > template.size:
            raise ScenarioError(f"K={k} exceeds the {template.size} candidate sites")
        if n_total % k:
            logger.warning(f"Skipping K={k}: N={n_total} is not divisible by K")
            skipped.append(k)
            continue
        jobs.extend([tuple(range(k))] if shortcut else subsets_with_anchor(template.size, k))

    logger.info(f"Deployment search ({mode.value}): {len(jobs)} subsets, epsilon={epsilon:.6g}")
    outcomes = map_ordered(lambda s: evaluate_subset(template, s, epsilon, mode), jobs,
                           max_workers=max_workers, desc="subsets")

    result = DeploymentResult(skipped_k=skipped, symmetry_shortcut=shortcut)
    best: Optional[SubsetOutcome] = None
    for outcome in outcomes:
        if not outcome.feasible:
            continue
        k = len(outcome.sites)
        if outcome.rate > result.per_k_best.get(k, float("-inf")):
            result.per_k_best[k] = outcome.rate
            result.per_k_sites[k] = outcome.sites
        # jobs are ordered by K then lexicographically, so strict > keeps the first
        if best is None or outcome.rate > best.rate:
            best = outcome

    if best is None:
        logger.info("No subset meets the sensing requirement")
        return result

    result.chosen_sites = best.sites
    result.k_chosen = len(best.sites)
    result.rate = best.rate
    result.crb_achieved = best.crb
    result.feasible = True
    result.regime = best.regime
    result.allocation = best.allocation
    logger.info(f"Best deployment: sites={best.sites}, rate={best.rate:.6f} bits/s/Hz, crb={best.crb:.6g}")
    return result


def tradeoff_curve(
    template: ScenarioTemplate,
    epsilon_grid: Sequence[float],
    mode: Optional[SearchMode] = None,
    symmetry_shortcut: bool = False,
) -> List[Tuple[float, float]]:
    """(1/epsilon, best rate) per target; infeasible targets report rate 0."""
    if any(e <= 0 for e in epsilon_grid):
        raise ScenarioError("every CRB target must be positive")
    curve = []
    for epsilon in epsilon_grid:
        result = search(template, epsilon, mode, symmetry_shortcut=symmetry_shortcut)
        curve.append((1.0 / epsilon, result.rate if result.feasible else 0.0))
    return curve
