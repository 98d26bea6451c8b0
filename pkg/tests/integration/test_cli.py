"""命令行端到端测试"""
import json

import pytest

from lab.cli import run
from lab.config import LabSettings
from lab.tables import RESULT_COLUMNS, read_rows


def lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


class TestCommands:

    def test_vinogradov_count(self, capsys):
        assert run(["count", "--vinogradov", "--d", "2", "--l", "2", "--N", "3"]) == 0
        assert lines(capsys) == ["15"]

    def test_sumset(self, capsys):
        assert run(["count", "--sumset", "1,2,4", "--l", "1"]) == 0
        assert lines(capsys) == ["7"]

    def test_moment(self, capsys):
        assert run(["moment", "--d", "1", "--N", "32", "--p", "2", "--box", "full", "--seq", "const"]) == 0
        assert lines(capsys)[0].startswith("32 ")

    def test_moment_grid_on_subbox(self, capsys):
        assert run(["moment", "--d", "2", "--N", "6", "--p", "4", "--box", "dyadic:1", "--quad", "grid",
                    "--seq", "rademacher:3"]) == 0
        assert lines(capsys)[0].endswith("(grid)")

    def test_eval(self, capsys):
        assert run(["eval", "--d", "1", "--N", "4", "--x", "0"]) == 0
        assert lines(capsys) == ["4 0 4"]

    def test_shell(self, capsys):
        assert run(["shell", "--N", "25", "--gamma", "2"]) == 0
        assert lines(capsys) == ["7", "arc_max 7"]
        assert run(["shell", "--N", "25", "--no-endpoints"]) == 0
        assert lines(capsys) == ["5"]

    def test_shell_pairs(self, capsys, tmp_path):
        out = str(tmp_path / "pairs.csv")
        assert run(["count", "--shell-pairs", "--N", "25", "--out", out]) == 0
        assert lines(capsys)[0].startswith("zero ")
        header, rows = read_rows(out)
        assert header == ["j", "count"] and rows[0][0] == "zero"

    def test_decoupling_spike(self, capsys):
        assert run(["decoupling", "--statement", "a11", "--N", "16", "--quad", "mc:1000",
                    "--seq", '{"kind": "indicator", "lo": 8, "hi": 8}']) == 0
        ratio = float(lines(capsys)[0].split("ratio ")[1].split()[0])
        assert ratio == pytest.approx(16.0 ** -4, rel=1e-9)

    def test_kernel_l4(self, capsys):
        assert run(["kernel", "--form", "l4", "--N", "2", "--beta", "1"]) == 0
        assert float(lines(capsys)[0]) > 0

    def test_fit(self, capsys, tmp_path):
        out = str(tmp_path / "fit.csv")
        assert run(["fit", "--d", "1", "--p", "2", "--ladder", "8,16,32,64", "--out", out]) == 0
        slope = float(lines(capsys)[0].split()[1])
        assert slope == pytest.approx(1.0, abs=1e-9)
        _, rows = read_rows(out)
        assert len(rows) == 5


class TestExitCodes:

    def test_unknown_flag(self, capsys):
        assert run(["moment", "--bogus"]) == 64
        assert "错误" in capsys.readouterr().err

    def test_missing_parameter(self):
        assert run(["moment", "--d", "1", "--N", "4"]) == 64

    def test_missing_count_mode(self):
        assert run(["count", "--N", "4"]) == 64

    def test_domain_error(self):
        assert run(["moment", "--d", "1", "--N", "4", "--p", "0"]) == 2
        assert run(["kernel", "--form", "cip", "--C", "500", "--D", "1", "--beta", "0.7"]) == 2

    def test_resource_guard(self):
        assert run(["count", "--vinogradov", "--d", "2", "--l", "3", "--N", "100", "--max-tuples", "1000"]) == 3

    def test_heavy_suite_refused(self):
        assert run(["verify", "decoupling-heavy", "--max-seconds", "1"]) == 3

    def test_unknown_suite(self):
        assert run(["verify", "everything"]) == 64

    def test_help(self, capsys):
        assert run(["--help"]) == 0
        assert "weyl" in capsys.readouterr().out


class TestConfigFiles:

    def test_flags_override_saved_config(self, capsys, tmp_path):
        path = str(tmp_path / "count.json")
        assert run(["count", "--vinogradov", "--d", "2", "--l", "2", "--N", "3", "--save-config", path]) == 0
        saved = json.loads(open(path, encoding="utf-8").read())
        assert saved["command"] == "count" and saved["params"]["N"] == 3
        assert run(["count", "--config", path, "--N", "4"]) == 0
        assert lines(capsys) == ["15", "28"]

    def test_command_mismatch(self, tmp_path):
        path = str(tmp_path / "shell.json")
        assert run(["shell", "--N", "25", "--save-config", path]) == 0
        assert run(["count", "--config", path, "--vinogradov"]) == 64

    def test_results_csv(self, capsys, tmp_path):
        out = str(tmp_path / "results.csv")
        assert run(["moment", "--d", "2", "--N", "3", "--p", "4", "--out", out, "--timing"]) == 0
        header, rows = read_rows(out)
        assert tuple(header) == RESULT_COLUMNS
        assert rows[0][RESULT_COLUMNS.index("value")] == "15"
        assert rows[0][RESULT_COLUMNS.index("wall_ms")] != ""


class TestGuardSettings:

    ROW_SUP = ["kernel", "--form", "row-sup", "--d", "2", "--N", "8"]

    @pytest.fixture
    def tight_pairs(self, monkeypatch):
        # 8 个格点需要 64 对
        monkeypatch.setenv("WEYL_MAX_PAIRS", "10")
        monkeypatch.setattr("lab.cli.settings", LabSettings.from_env())

    def test_env_max_pairs_reaches_guard(self, tight_pairs):
        assert run(self.ROW_SUP) == 3

    def test_flag_overrides_env(self, tight_pairs, capsys):
        assert run(self.ROW_SUP + ["--max-pairs", "100"]) == 0
        assert len(lines(capsys)) == 1

    def test_config_file_overrides_env(self, tight_pairs, tmp_path):
        path = tmp_path / "kernel.json"
        params = {"form": "row-sup", "d": 2, "N": 8}
        path.write_text(json.dumps({"command": "kernel", "params": params, "max_pairs": 100}), encoding="utf-8")
        assert run(["kernel", "--config", str(path)]) == 0
        path.write_text(json.dumps({"command": "kernel", "params": params}), encoding="utf-8")
        assert run(["kernel", "--config", str(path)]) == 3

    def test_shell_pairs_respects_flag(self):
        assert run(["count", "--shell-pairs", "--N", "25", "--max-pairs", "4"]) == 3
