import yaml
from click.testing import CliRunner

from app.cli import cli
from app.services.storage import COLUMNS, read_csv


def write(tmp_path, text: str) -> str:
    path = tmp_path / "experiment.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestDefaults:
    def test_prints_system_block(self):
        result = CliRunner().invoke(cli, ["defaults"])
        assert result.exit_code == 0
        system = yaml.safe_load(result.output)["system"]
        assert system["n_total"] == 800
        assert system["m_t"] == 32


class TestValidate:
    def test_valid(self, tmp_path):
        result = CliRunner().invoke(cli, ["validate", write(tmp_path, "name: crb_vs_k\nsweep: [1, 2]\n")])
        assert result.exit_code == 0
        assert result.output.startswith("OK: crb_vs_k")

    def test_invalid_exits_with_two(self, tmp_path):
        result = CliRunner().invoke(cli, ["validate", write(tmp_path, "name: rate_vs_inv_crb\nk: 3\n")])
        assert result.exit_code == 2
        assert "not divisible by K=3" in result.output

    def test_override_fixes_config(self, tmp_path):
        path = write(tmp_path, "name: rate_vs_inv_crb\nk: 3\n")
        result = CliRunner().invoke(cli, ["validate", path, "--set", "k=4"])
        assert result.exit_code == 0


class TestRun:
    def test_writes_csv_and_sidecar(self, tmp_path):
        out = tmp_path / "results" / "crb.csv"
        config = write(tmp_path, "name: crb_vs_k\n")
        result = CliRunner().invoke(cli, [
            "run", config, "--out", str(out), "--seed", "11", "--set", "sweep=[1, 2]", "--workers", "1",
        ])
        assert result.exit_code == 0, result.output
        assert "6 rows written" in result.output

        rows = read_csv(str(out))
        assert len(rows) == 6
        assert out.read_text(encoding="utf-8").splitlines()[0] == ",".join(COLUMNS)
        with open(f"{out}.meta.yaml", encoding="utf-8") as handle:
            assert yaml.safe_load(handle)["seed"] == 11

    def test_experiment_option_overrides_file(self, tmp_path):
        out = tmp_path / "dof.csv"
        config = write(tmp_path, "name: crb_vs_k\n")
        result = CliRunner().invoke(cli, [
            "run", config, "--experiment", "dof_slope", "--out", str(out), "--set", "sweep=[1]", "--workers", "1",
        ])
        assert result.exit_code == 0, result.output
        assert read_csv(str(out))[0].experiment == "dof_slope"

    def test_missing_config(self, tmp_path):
        result = CliRunner().invoke(cli, ["run", str(tmp_path / "absent.yaml")])
        assert result.exit_code == 2
