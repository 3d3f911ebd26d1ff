import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import ScenarioError
from app.schemas.scenario import IrsSite, SitePlacement, SystemParameters
from app.services.channel.builder import ScenarioTemplate, triangulate


class TestTriangulation:
    def test_rays_meet_between_bs_and_cu(self):
        bs, cu = np.array([0.0, 0.0]), np.array([100.0, 0.0])
        point = triangulate(bs, cu, 0.1, 0.4)
        assert 0 < point[0] < 100 and point[1] > 0
        assert point[1] / np.linalg.norm(point - bs) == pytest.approx(0.1)
        assert point[1] / np.linalg.norm(point - cu) == pytest.approx(0.4)

    def test_opposite_signs_rejected(self):
        with pytest.raises(ScenarioError):
            triangulate(np.zeros(2), np.array([100.0, 0.0]), 0.2, -0.2)


class TestScenarioTemplate:
    def test_default_candidates(self, default_template):
        assert default_template.size == 8
        scenario = default_template.first(8)
        assert scenario.is_colocated
        assert [s.n_elements for s in scenario.sites] == [100] * 8
        assert scenario.sites[0].is_semi_passive
        assert scenario.mu_target == scenario.sites[0].mu_it_d

    def test_recovers_candidate_angles(self, default_template):
        scenario = default_template.first(2)
        assert scenario.sites[0].mu_bi_d == pytest.approx(1 / 32, abs=1e-12)
        assert scenario.sites[0].mu_iu_a == pytest.approx(1 / 8, abs=1e-12)
        assert scenario.sites[1].mu_bi_d == pytest.approx(-1 / 32, abs=1e-12)

    def test_subset_requires_anchor(self, default_template):
        with pytest.raises(ScenarioError):
            default_template.subset((1, 2))

    def test_subset_requires_even_split(self, default_template):
        with pytest.raises(ScenarioError, match="N=800 is not divisible by K=3"):
            default_template.subset((0, 1, 2))

    def test_subset_keeps_candidate_geometry(self, default_template):
        scenario = default_template.subset((0, 5))
        assert scenario.sites[1].mu_bi_d == default_template.candidates[5].mu_bi_d
        assert scenario.sites[1].n_elements == 400

    def test_element_budget_change(self, default_template):
        scenario = default_template.with_elements(200).first(4)
        assert scenario.n_total == 200
        assert [s.n_elements for s in scenario.sites] == [50] * 4

    def test_path_loss_overrides_make_template_symmetric(self, default_template):
        placements = [
            SitePlacement(position=c.position, rho_bi=1e-4, rho_iu=2e-4, rho_it=3e-4)
            for c in default_template.candidates
        ]
        template = ScenarioTemplate.from_parameters(SystemParameters(sites=placements))
        assert template.is_symmetric()
        assert not default_template.is_symmetric()
        assert template.first(1).beta_tilde_sq == pytest.approx((3e-4) ** 4)


class TestSiteAngles:
    @staticmethod
    def site(mu: float) -> dict:
        return dict(n_elements=4, mu_bi_d=mu, mu_bi_a=0.0, mu_iu_d=0.0, mu_iu_a=0.0, mu_it_d=0.0,
                    rho_bi=1.0, rho_iu=1.0, rho_it=1.0)

    def test_endfire_aliases_to_minus_one(self):
        assert IrsSite(**self.site(-1.0)).mu_bi_d == -1.0
        with pytest.raises(ValidationError):
            IrsSite(**self.site(1.0))

    def test_geometry_angles_stay_below_one(self, default_template):
        for site in default_template.first(8).sites:
            for mu in (site.mu_bi_d, site.mu_bi_a, site.mu_iu_d, site.mu_iu_a, site.mu_it_d):
                assert -1.0 <= mu < 1.0
