import numpy as np
import pytest

from app.schemas.scenario import IrsSite, ScenarioConfig, SystemParameters
from app.services.channel.builder import ScenarioTemplate


@pytest.fixture(scope="session")
def default_template() -> ScenarioTemplate:
    """Reference geometry: M_t = 32, M_r = 8, eight candidate sites, N = 800."""
    return ScenarioTemplate.from_parameters(SystemParameters())


@pytest.fixture(scope="session")
def small_template() -> ScenarioTemplate:
    return ScenarioTemplate.from_parameters(SystemParameters(m_t=8, m_r=4, n_r=4, n_total=32))


@pytest.fixture(scope="session")
def separated_template() -> ScenarioTemplate:
    """Target 20 m off the CU, so communication and sensing directions differ."""
    params = SystemParameters(m_t=8, m_r=4, n_r=4, n_total=32, target_position=(90.0, 20.0))
    return ScenarioTemplate.from_parameters(params)


def equalized(scenario: ScenarioConfig, n_total: int = None, rho_bi: float = 1e-4,
              rho_iu: float = 1e-4) -> ScenarioConfig:
    """Same angles with identical path losses and an even element split."""
    n_total = n_total or scenario.n_total
    sites = tuple(
        site.model_copy(update={"rho_bi": rho_bi, "rho_iu": rho_iu, "n_elements": n_total // scenario.k})
        for site in scenario.sites
    )
    return scenario.model_copy(update={"sites": sites, "n_total": n_total})


def random_scenario(rng: np.random.Generator, k: int, n_per_site: int, m_t: int = 8,
                    n_r: int = 8) -> ScenarioConfig:
    """Arbitrary angles and path losses; no orthogonality between sites."""
    mu_target = float(rng.uniform(-0.9, 0.9))
    sites = []
    for index in range(k):
        angles = rng.uniform(-0.9, 0.9, 5)
        sites.append(IrsSite(
            n_elements=n_per_site,
            mu_bi_d=float(angles[0]),
            mu_bi_a=float(angles[1]),
            mu_iu_d=float(angles[2]),
            mu_iu_a=float(angles[3]),
            mu_it_d=mu_target if index == 0 else float(angles[4]),
            rho_bi=float(rng.uniform(0.5, 1.5)),
            rho_iu=float(rng.uniform(0.5, 1.5)),
            rho_it=float(rng.uniform(0.5, 1.5)),
            is_semi_passive=index == 0,
        ))
    return ScenarioConfig(
        m_t=m_t,
        m_r=4,
        n_r=n_r,
        n_total=k * n_per_site,
        sites=tuple(sites),
        p_max=1.0,
        sigma2_c=1e-2,
        sigma2_s=1e-2,
        t_symbols=16,
        beta_tilde_sq=float(rng.uniform(0.5, 2.0)),
        rho_ts=1.0,
        mu_target=mu_target,
    )


def random_covariance(rng: np.random.Generator, size: int, trace: float = 1.0) -> np.ndarray:
    root = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    r_x = root @ root.conj().T
    return trace * r_x / np.trace(r_x).real
