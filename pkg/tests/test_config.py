import pytest
from pydantic import ValidationError

from tubeground.config import RunConfig, load_run_config, parse_config_file


class TestRunConfig:
    def test_widths_must_ascend(self):
        with pytest.raises(ValidationError, match="ascending"):
            RunConfig(widths=[8, 4])
        with pytest.raises(ValidationError, match="ascending"):
            RunConfig(widths=[4, 4, 8])

    def test_positive_dims_enforced(self):
        with pytest.raises(ValidationError):
            RunConfig(model_dim=0)
        with pytest.raises(ValidationError):
            RunConfig(learning_rate=-1.0)

    def test_query_mode_restricted(self):
        with pytest.raises(ValidationError):
            RunConfig(query_mode="mean_pool")


class TestConfigFile:
    def test_parse_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment line\n"
            "model_dim = 24\n"
            "widths = 4, 8, 16\n"
            "use_explicit = false\n"
            "stop_m_tiou = none\n"
            "lambda2 = 0.5\n"
        )
        run = load_run_config(cfg, overrides={"model_dim": 48, "epochs": None})
        assert run.model_dim == 48  # explicit override wins
        assert run.widths == [4, 8, 16]
        assert run.use_explicit is False
        assert run.stop_m_tiou is None
        assert run.lambda_reg == 0.5  # lambda2 alias
        assert run.epochs == RunConfig().epochs  # None override ignored

    def test_bad_line_reports_location(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("model_dim 24\n")
        with pytest.raises(ValueError, match="bad.cfg:1"):
            parse_config_file(cfg)
