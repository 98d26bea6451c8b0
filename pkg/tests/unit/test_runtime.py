"""runtime / config / errors"""
import time

import pytest

from lab.config import LabSettings, RunConfig
from lab.errors import DomainError, LabError, ResourceGuardError, UsageError, create_error_response
from lab.runtime import TimeoutManager, WorkerPool, exact_complex_sum, exact_sum, split_range


class TestRuntime:

    def test_split_range(self):
        assert split_range(10, 4) == [(0, 4), (4, 8), (8, 10)]
        assert split_range(0, 4) == []

    def test_exact_sum_is_order_independent(self):
        values = [1e16, 1.0, -1e16, 1e-3]
        assert exact_sum(values) == exact_sum(reversed(values)) == 1.001
        assert exact_complex_sum([1e16 + 1j, 1 - 1e16j, -1e16 + 1e16j]) == complex(1, 1)

    def test_pool_keeps_block_order(self, pool4):
        blocks = split_range(1000, 7)
        assert pool4.map(lambda s: s[0], blocks) == [s for s, _ in blocks]

    def test_deadline(self):
        deadline = TimeoutManager(1e-6)
        time.sleep(0.01)
        with pytest.raises(ResourceGuardError) as info:
            deadline.check("测试")
        assert info.value.details["elapsed"] > 1e-6
        with pytest.raises(ResourceGuardError):
            WorkerPool(2, deadline).map(lambda b: b, [1, 2, 3])

    def test_no_deadline(self):
        TimeoutManager(0).check()
        TimeoutManager(None).check()


class TestConfig:

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("WEYL_THREADS", "3")
        monkeypatch.setenv("WEYL_MAX_TUPLES", "abc")
        monkeypatch.setenv("WEYL_MAX_SECONDS", "2.5")
        monkeypatch.setenv("WEYL_LOG_LEVEL", "info")
        s = LabSettings.from_env()
        assert s.threads == 3
        assert s.max_tuples == 10 ** 8
        assert s.max_seconds == 2.5
        assert s.log_level == "INFO"

    def test_run_config_json(self, tmp_path):
        config = RunConfig("moment", {"d": 2, "N": 8, "p": 4.0}, seed=5, threads=2)
        path = tmp_path / "run.json"
        path.write_text(config.to_json())
        assert RunConfig.from_file(str(path)) == config

    def test_missing_fields_take_defaults(self):
        env = LabSettings(threads=3, max_tuples=7, max_pairs=11, max_grid_points=13,
                          max_seconds=0.0, log_level="WARNING").run_defaults()
        config = RunConfig.from_json('{"command": "kernel", "max_pairs": 99}', env)
        assert config.max_pairs == 99
        assert config.max_tuples == 7 and config.threads == 3 and config.max_grid_points == 13

    def test_unknown_fields_ignored(self):
        assert RunConfig.from_json('{"command": "shell", "extra": 1}').command == "shell"

    @pytest.mark.parametrize("text", ["[1]", "{", '{"seed": 3}'])
    def test_bad_json(self, text):
        with pytest.raises(DomainError):
            RunConfig.from_json(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DomainError):
            RunConfig.from_file(str(tmp_path / "nope.json"))

    def test_merged(self):
        base = RunConfig("moment", {"d": 2, "N": 8}, seed=5)
        merged = base.merged(params={"N": 16}, seed=None, threads=4)
        assert merged.params == {"d": 2, "N": 16}
        assert merged.seed == 5 and merged.threads == 4
        assert base.params == {"d": 2, "N": 8}


class TestErrors:

    def test_exit_codes(self):
        assert LabError("x").exit_code == 1
        assert DomainError("x").exit_code == 2
        assert ResourceGuardError("x").exit_code == 3
        assert UsageError("x").exit_code == 64

    def test_details(self):
        e = ResourceGuardError("太大", required_counts=(15, 127))
        assert e.details == {"required_counts": (15, 127)}
        record = create_error_response("ResourceGuardError", e.message, e.exit_code, e.details)
        assert record["error"] == {"message": "太大", "type": "ResourceGuardError", "code": 3,
                                   "details": {"required_counts": (15, 127)}}
        assert "details" not in create_error_response("DomainError", "x", 2)["error"]
