import numpy as np
import pytest

from app.schemas.experiment import ExperimentName, ExperimentSpec, SchemeName
from app.services.comm.rate import comm_only_optimum
from app.services.experiments import SchemeFactory, build_points, run, run_experiment
from app.services.experiments.runner import skipped_k_values
from app.services.experiments.schemes import ProposedScheme, time_share


def rows_of(rows, scheme):
    return [row for row in rows if row.scheme == scheme]


class TestTimeShare:
    def test_blend_fraction(self):
        assert time_share(1.0, 4.0, 2.0) == pytest.approx(1 / 3, rel=1e-12)

    def test_unreachable(self):
        assert time_share(4.0, 8.0, 2.0) is None

    def test_comm_design_already_meets_target(self):
        assert time_share(1.0, 1.0, 2.0) == 0.0

    def test_blind_comm_design_scales_sensing_crb(self):
        tau = time_share(0.5, float("inf"), 2.0)
        assert tau == pytest.approx(0.25, rel=1e-12)
        assert 0.5 / tau == pytest.approx(2.0, rel=1e-12)


class TestSchemeFactory:
    def test_builds_every_scheme(self):
        spec = ExperimentSpec(name="rate_vs_n", sweep=[400, 800])
        for name in SchemeFactory.get_all_schemes():
            assert SchemeFactory.get_scheme(name, spec).name.value == name

    def test_passes_options(self):
        spec = ExperimentSpec(name="rate_vs_k", sweep=[1, 2], symmetry_shortcut=True)
        scheme = SchemeFactory.get_scheme(SchemeName.PROPOSED, spec)
        assert isinstance(scheme, ProposedScheme)
        assert scheme.symmetry_shortcut

    def test_unknown_scheme(self):
        spec = ExperimentSpec()
        with pytest.raises(ValueError) as info:
            SchemeFactory.get_scheme("round_robin", spec)
        assert "round_robin" in str(info.value)
        assert all(name.value in str(info.value) for name in SchemeName)


class TestBuildPoints:
    def test_epsilon_sweep_reports_inverse_target(self):
        points = build_points(ExperimentSpec(name="rate_vs_inv_crb", sweep=[-10, -20]))
        assert [p.sweep_value for p in points] == pytest.approx([10.0, 100.0])
        assert [p.epsilon for p in points] == pytest.approx([0.1, 0.01])
        assert all(p.k == 8 for p in points)

    def test_element_sweep(self):
        points = build_points(ExperimentSpec(name="crb_vs_n", sweep=[100, 200], k=2))
        assert [p.template.params.n_total for p in points] == [100, 200]
        assert [p.index for p in points] == [0, 1]

    def test_skipped_k(self):
        spec = ExperimentSpec(name="rate_vs_n", sweep=[400, 600])
        assert skipped_k_values(spec) == {400: [3, 6, 7], 600: [7]}
        assert skipped_k_values(ExperimentSpec()) == {}


class TestSensingBaselines:
    def test_single_site_schemes_agree(self):
        spec = ExperimentSpec(name="crb_vs_n", sweep=[100, 200], k=1)
        rows = run_experiment(spec, max_workers=1)
        assert len(rows) == 6
        for value in (100.0, 200.0):
            crbs = [row.crb_linear for row in rows if row.sweep_value == value]
            np.testing.assert_allclose(crbs, crbs[0], rtol=1e-9)

    def test_sensing_crb_grows_with_k(self):
        rows = run_experiment(ExperimentSpec(name="crb_vs_k"), max_workers=1)
        crbs = [row.crb_linear for row in rows_of(rows, "sensing_oriented")]
        assert len(crbs) == 4
        assert all(a < b for a, b in zip(crbs, crbs[1:]))
        assert all(row.rate_bits == 0.0 for row in rows_of(rows, "sensing_oriented"))

    def test_comm_oriented_crb_is_never_below_sensing(self):
        rows = run_experiment(ExperimentSpec(name="crb_vs_k", sweep=[1, 2, 4]), max_workers=1)
        for sensing, comm in zip(rows_of(rows, "sensing_oriented"), rows_of(rows, "comm_oriented")):
            assert comm.crb_linear >= sensing.crb_linear * (1 - 1e-9)


class TestTradeoffExperiments:
    def test_loose_targets_give_comm_rate(self, default_template):
        spec = ExperimentSpec(name="rate_vs_inv_crb", sweep=[-10, -15], schemes=["proposed", "comm_oriented"])
        rows = run_experiment(spec, max_workers=1)
        for proposed, comm in zip(rows_of(rows, "proposed"), rows_of(rows, "comm_oriented")):
            assert proposed.rate_bits == pytest.approx(comm.rate_bits, rel=1e-9)
            assert proposed.feasible
        _, _, rate = comm_only_optimum(default_template.first(8))
        assert rows[0].rate_bits == pytest.approx(rate, rel=1e-9)

    def test_unreachable_target_marks_rows(self):
        spec = ExperimentSpec(name="rate_vs_k", sweep=[1, 2], epsilon_db=-150)
        rows = run_experiment(spec, max_workers=1)
        assert len(rows) == 4
        assert not any(row.feasible for row in rows)
        assert all(row.rate_bits == 0.0 for row in rows)

    def test_search_dominates_fixed_k(self):
        spec = ExperimentSpec(name="rate_vs_n", sweep=[400, 800])
        rows = run_experiment(spec, max_workers=1)
        assert {row.scheme for row in rows} == {"proposed", "time_switching", "fixed_k1", "fixed_k8"}
        for value in (400.0, 800.0):
            at = {row.scheme: row for row in rows if row.sweep_value == value}
            assert at["proposed"].rate_bits >= at["fixed_k1"].rate_bits - 1e-9
            assert at["proposed"].rate_bits >= at["fixed_k8"].rate_bits - 1e-9

    def test_time_switching_never_beats_search(self):
        spec = ExperimentSpec(name="rate_vs_k", sweep=[1, 2, 4])
        rows = run_experiment(spec, max_workers=1)
        for proposed, switching in zip(rows_of(rows, "proposed"), rows_of(rows, "time_switching")):
            if switching.feasible:
                assert proposed.rate_bits >= switching.rate_bits - 1e-9


class TestDofSlope:
    def test_slope_tracks_stream_count(self):
        rows = run_experiment(ExperimentSpec(name="dof_slope"), max_workers=1)
        assert [row.k_used for row in rows] == [1, 4, 8]
        for row in rows:
            assert row.rate_bits == pytest.approx(row.k_used, rel=0.05)
            assert np.isnan(row.crb_linear)


class TestRun:
    def test_output_is_reproducible(self, tmp_path):
        spec = ExperimentSpec(name=ExperimentName.CRB_VS_K, sweep=[1, 2, 4])
        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        run(spec, output_path=str(first), max_workers=2)
        run(spec, output_path=str(second), max_workers=2)
        assert first.read_bytes() == second.read_bytes()
        assert (tmp_path / "first.csv.meta.yaml").exists()

    def test_rows_follow_sweep_then_scheme_order(self, tmp_path):
        spec = ExperimentSpec(name="crb_vs_k", sweep=[1, 2])
        rows = run(spec, output_path=str(tmp_path / "out.csv"), max_workers=2)
        assert [(row.sweep_value, row.scheme) for row in rows] == [
            (1.0, "sensing_oriented"), (1.0, "comm_oriented"), (1.0, "max_eigenmode"),
            (2.0, "sensing_oriented"), (2.0, "comm_oriented"), (2.0, "max_eigenmode"),
        ]
