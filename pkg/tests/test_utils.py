"""Tests for the utils module."""

import json
import math
import os

import numpy as np
import pytest

from markov_lyapunov.utils import (
    ENV_PREFIX,
    default_workers,
    derive_seed,
    env_int,
    env_str,
    load_env,
    to_jsonable,
    write_json,
)


class TestLoadEnv:
    """Test the load_env function."""

    def test_load_env_with_valid_file(self, tmp_path, monkeypatch):
        """Comments in both styles are skipped and values keep inner spaces."""
        env_path = tmp_path / ".env"
        env_path.write_text(
            "\n".join(
                [
                    "# a comment",
                    "MARKOV_LYAPUNOV_OUT=results dir",
                    "// another comment style",
                    "MARKOV_LYAPUNOV_WORKERS=3",
                    "not a pair",
                    "OTHER_KEY=ignored in result",
                ]
            )
        )
        keys = ("MARKOV_LYAPUNOV_OUT", "MARKOV_LYAPUNOV_WORKERS", "OTHER_KEY")
        for key in keys:
            monkeypatch.delenv(key, raising=False)

        try:
            result = load_env(env_path)

            assert os.environ["MARKOV_LYAPUNOV_OUT"] == "results dir"
            assert os.environ["OTHER_KEY"] == "ignored in result"
            assert result["MARKOV_LYAPUNOV_WORKERS"] == "3"
            assert "OTHER_KEY" not in result
        finally:
            for key in keys:
                os.environ.pop(key, None)

    def test_load_env_does_not_override_existing(self, tmp_path, monkeypatch):
        """Variables already in the environment win over the file."""
        env_path = tmp_path / ".env"
        env_path.write_text("MARKOV_LYAPUNOV_LOG_LEVEL=DEBUG\n")
        monkeypatch.setenv("MARKOV_LYAPUNOV_LOG_LEVEL", "WARNING")

        load_env(env_path)

        assert os.environ["MARKOV_LYAPUNOV_LOG_LEVEL"] == "WARNING"

    def test_load_env_missing_file(self, tmp_path):
        """A missing file is not an error."""
        result = load_env(tmp_path / "absent.env")
        assert all(key.startswith(ENV_PREFIX) for key in result)


class TestEnvHelpers:
    def test_env_str_default_when_blank(self, monkeypatch):
        monkeypatch.setenv("MARKOV_LYAPUNOV_OUT", "  ")
        assert env_str("OUT", "out") == "out"

    def test_env_int_malformed_falls_back(self, monkeypatch):
        monkeypatch.setenv("MARKOV_LYAPUNOV_WORKERS", "many")
        assert env_int("WORKERS", 4) == 4

    def test_default_workers_from_env(self, monkeypatch):
        monkeypatch.setenv("MARKOV_LYAPUNOV_WORKERS", "0")
        assert default_workers() == 1
        monkeypatch.setenv("MARKOV_LYAPUNOV_WORKERS", "6")
        assert default_workers() == 6


class TestDeriveSeed:
    def test_deterministic_and_label_dependent(self):
        assert derive_seed(7, "subadditive") == derive_seed(7, "subadditive")
        assert derive_seed(7, "subadditive") != derive_seed(7, "furstenberg")
        assert derive_seed(7, "subadditive") != derive_seed(8, "subadditive")

    def test_fits_in_signed_64_bits(self):
        assert 0 <= derive_seed(123, "probes") < 2**63


class TestJson:
    def test_numpy_and_complex_values(self):
        payload = {
            "array": np.array([1.0, 2.0]),
            "scalar": np.float64(0.5),
            "complex": 1 + 2j,
            "nan": math.nan,
            "nested": ({"inf": np.inf},),
        }
        assert to_jsonable(payload) == {
            "array": [1.0, 2.0],
            "scalar": 0.5,
            "complex": {"real": 1.0, "imag": 2.0},
            "nan": None,
            "nested": [{"inf": None}],
        }

    def test_write_json_creates_directories(self, tmp_path):
        path = tmp_path / "a" / "b" / "report.json"
        write_json(path, {"b": 1, "a": np.int64(2)})
        text = path.read_text()
        assert json.loads(text) == {"a": 2, "b": 1}
        assert text.index('"a"') < text.index('"b"')


@pytest.mark.parametrize("value", [np.float32(1.5), np.int32(3)])
def test_numpy_scalars_become_python(value):
    assert type(to_jsonable(value)) in (float, int)
