"""Tests for environment settings and key=value config files."""

import pytest

from dnirb.config import Settings, load_config_file
from dnirb.errors import ConfigurationError


class TestSettings:
    def test_defaults(self, monkeypatch):
        for var in ("DNIRB_THREADS", "DNIRB_LOG_LEVEL", "DNIRB_LOG_FILE"):
            monkeypatch.delenv(var, raising=False)
        settings = Settings.from_env()
        assert settings.threads == 1
        assert settings.log_level == "INFO"
        assert settings.log_file is None

    def test_from_environment(self, monkeypatch):
        monkeypatch.setenv("DNIRB_THREADS", "4")
        monkeypatch.setenv("DNIRB_LOG_LEVEL", "debug")
        settings = Settings.from_env()
        assert (settings.threads, settings.log_level) == (4, "DEBUG")

    def test_bad_thread_count_falls_back(self, monkeypatch):
        monkeypatch.setenv("DNIRB_THREADS", "many")
        assert Settings.from_env().threads == 1


class TestConfigFile:
    def test_keys_normalised(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# defaults\n--batch-size = 16\nLR=0.0005\n\nnoise_model=gaussian\n")
        assert load_config_file(path) == {"batch_size": "16", "lr": "0.0005", "noise_model": "gaussian"}

    def test_value_may_contain_equals(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("out=a=b.ckpt\n")
        assert load_config_file(path) == {"out": "a=b.ckpt"}

    @pytest.mark.parametrize("line", ["just words", "=5"])
    def test_malformed(self, tmp_path, line):
        path = tmp_path / "bad.cfg"
        path.write_text(line + "\n")
        with pytest.raises(ConfigurationError):
            load_config_file(path)
