import numpy as np
import pytest

from app.core.exceptions import ScenarioError
from app.services.channel.geometry import (
    PhaseShifts,
    candidate_angles,
    cascade_vector,
    comm_aligned_phases,
    effective_channel,
    path_loss_amplitude,
    random_phases,
    sensing_aligned_phases,
    steering,
    steering_derivative,
    steering_derivative_norm_sq,
    verify_orthogonality,
    with_sensing_anchor,
)
from app.services.comm.rate import subchannel_gains


class TestSteering:
    def test_unit_modulus_and_norm(self):
        rng = np.random.default_rng(0)
        for count in (1, 2, 7, 32):
            a = steering(count, float(rng.uniform(-1, 1)))
            np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)
            assert np.vdot(a, a).real == pytest.approx(count)

    def test_centered_phase(self):
        a = steering(4, 0.5)
        np.testing.assert_allclose(a[0], np.exp(-1j * np.pi * 1.5 * 0.5))

    def test_derivative_matches_finite_difference(self):
        h = 1e-6
        numeric = (steering(16, 0.3 + h) - steering(16, 0.3 - h)) / (2 * h)
        np.testing.assert_allclose(steering_derivative(16, 0.3), numeric, rtol=1e-7, atol=1e-7)

    def test_derivative_norm(self):
        for count in (1, 8, 33):
            d = steering_derivative(count, -0.2)
            assert np.vdot(d, d).real == pytest.approx(steering_derivative_norm_sq(count), rel=1e-12)

    def test_empty_array_rejected(self):
        with pytest.raises(ScenarioError):
            steering(0, 0.1)


class TestPathLoss:
    def test_free_space_amplitude(self):
        # K0 = -40 dB at 100 m with alpha = 2 gives -80 dB in power
        assert path_loss_amplitude(100.0, 2.0, -40.0) ** 2 == pytest.approx(1e-8)

    def test_zero_distance_rejected(self):
        with pytest.raises(ScenarioError):
            path_loss_amplitude(0.0, 2.0, -40.0)


class TestCandidateAngles:
    def test_grid_spacing(self):
        pairs = candidate_angles(32, 8, 8)
        assert len(pairs) == 8
        assert pairs[0] == (1 / 32, 1 / 8)
        bs = np.array([p[0] for p in pairs])
        cu = np.array([p[1] for p in pairs])
        for grid, m in ((bs, 32), (cu, 8)):
            steps = np.abs(grid[:, None] - grid[None, :]) * m / 2
            np.testing.assert_allclose(steps, np.round(steps), atol=1e-12)

    def test_signs_match(self):
        for mu_b, mu_u in candidate_angles(16, 8, 8):
            assert np.sign(mu_b) == np.sign(mu_u)

    def test_too_many_rejected(self):
        with pytest.raises(ScenarioError):
            candidate_angles(32, 8, 9)

    def test_orthogonality_of_full_candidate_set(self, default_template):
        assert verify_orthogonality(default_template.first(8)) < 1e-12


class TestPhaseShifts:
    def test_validation(self, small_template):
        scenario = small_template.first(2)
        with pytest.raises(ScenarioError):
            PhaseShifts.from_list([np.ones(16)]).validate_for(scenario)
        with pytest.raises(ScenarioError):
            PhaseShifts.from_list([np.ones(16), 2 * np.ones(16)]).validate_for(scenario, unit_modulus=False)
        with pytest.raises(ScenarioError):
            PhaseShifts.from_list([np.ones(16), 0.5 * np.ones(16)]).validate_for(scenario)

    def test_projection(self):
        phases = PhaseShifts.from_list([np.array([0.0, 0.5j, -3.0])])
        np.testing.assert_allclose(phases.projected().vectors[0], [1.0, 1j, -1.0])

    def test_alignment_reaches_element_count(self, default_template):
        scenario = default_template.first(4)
        for site, v in zip(scenario.sites, comm_aligned_phases(scenario).vectors):
            assert abs(cascade_vector(site, site.mu_iu_d) @ v) == pytest.approx(site.n_elements)
        for site, v in zip(scenario.sites, sensing_aligned_phases(scenario).vectors):
            assert abs(cascade_vector(site, site.mu_it_d) @ v) == pytest.approx(site.n_elements)

    def test_sensing_anchor_replaces_first_site_only(self, separated_template):
        scenario = separated_template.first(2)
        phases = random_phases(scenario, np.random.default_rng(3))
        anchored = with_sensing_anchor(scenario, phases)
        np.testing.assert_array_equal(anchored.vectors[1], phases.vectors[1])
        assert not np.allclose(anchored.vectors[0], phases.vectors[0])


class TestEffectiveChannel:
    def test_singular_values_match_subchannel_gains(self, default_template):
        scenario = default_template.first(4)
        phases = random_phases(scenario, np.random.default_rng(11))
        singular = np.linalg.svd(effective_channel(scenario, phases), compute_uv=False)
        expected = np.sort(np.sqrt(subchannel_gains(scenario, phases).gains))[::-1]
        np.testing.assert_allclose(singular[:4], expected, rtol=1e-10)
        assert np.all(singular[4:] < 1e-10 * singular[0])
