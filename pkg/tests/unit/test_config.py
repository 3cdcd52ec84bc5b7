"""Unit tests for config resolution."""

import json

import pytest

from src.errors.core import UsageError
from src.services.config_service import ConfigService
from src.utils.helpers import Helpers


class TestEnvironment:
    """Environment overrides."""

    def test_nested_values(self):
        """Sections nest on double underscores and values parse as JSON."""
        environ = {
            "REMB_CFG__TRAIN__EPOCHS": "5",
            "REMB_CFG__EVAL__SWEEP_C_VALUES": "[0.0, 0.5]",
            "REMB_CFG__POOL__BACKEND__MODEL": "thinking",
            "UNRELATED": "1",
        }
        assert ConfigService.from_environment(environ) == {
            "eval": {"sweep_c_values": [0.0, 0.5]},
            "pool": {"backend": {"model": "thinking"}},
            "train": {"epochs": 5},
        }

    def test_malformed_name(self):
        """Empty path segments are rejected."""
        with pytest.raises(UsageError, match="malformed"):
            ConfigService.from_environment({"REMB_CFG__TRAIN____EPOCHS": "5"})

    def test_conflicting_names(self):
        """A scalar override cannot also be a section."""
        environ = {"REMB_CFG__SEED": "1", "REMB_CFG__SEED__X": "2"}
        with pytest.raises(UsageError, match="conflicts"):
            ConfigService.from_environment(environ)


class TestFile:
    """Config files."""

    def test_missing(self, tmp_path):
        """A missing file names its path."""
        with pytest.raises(UsageError, match="does not exist"):
            ConfigService.from_file(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        """Unparseable JSON is a usage error."""
        path = tmp_path / "bad.json"
        path.write_text("{seed: 1", encoding="utf-8")
        with pytest.raises(UsageError, match="not valid JSON"):
            ConfigService.from_file(path)

    def test_not_an_object(self, tmp_path):
        """The document must be an object."""
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(UsageError, match="JSON object"):
            ConfigService.from_file(path)


class TestLoad:
    """Layer precedence and validation."""

    def test_precedence(self, tmp_path):
        """Flags beat the file, the file beats the environment, the environment beats defaults."""
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 2, "train": {"epochs": 4}}), encoding="utf-8")
        environ = {"REMB_CFG__SEED": "1", "REMB_CFG__TRAIN__EPOCHS": "9",
                   "REMB_CFG__TRAIN__BATCH_SIZE": "8"}
        config = ConfigService.load_pipeline_config(
            path, flags={"seed": 3, "out_dir": None}, environ=environ
        )
        assert config.seed == 3
        assert config.train.epochs == 4
        assert config.train.batch_size == 8
        assert config.out_dir == "out"

    def test_unset_flags_ignored(self):
        """None-valued flags leave lower layers in place."""
        config = ConfigService.load_pipeline_config(
            flags={"train": {"epochs": None}}, environ={"REMB_CFG__TRAIN__EPOCHS": "7"}
        )
        assert config.train.epochs == 7

    def test_unknown_key(self):
        """Unknown keys name their location."""
        with pytest.raises(UsageError, match="invalid config at train.epoch"):
            ConfigService.load_pipeline_config(flags={"train": {"epoch": 3}}, environ={})

    def test_invalid_value(self):
        """Out-of-range values are usage errors."""
        with pytest.raises(UsageError, match="rl.group_size"):
            ConfigService.load_pipeline_config(environ={"REMB_CFG__RL__GROUP_SIZE": "1"})

    def test_provenance_excludes_out_dir(self):
        """Where outputs go does not change the config hash."""
        a = ConfigService.load_pipeline_config(flags={"out_dir": "a"}, environ={})
        b = ConfigService.load_pipeline_config(flags={"out_dir": "b"}, environ={})
        assert "out_dir" not in ConfigService.provenance(a)
        assert Helpers.config_hash(ConfigService.provenance(a)) == Helpers.config_hash(
            ConfigService.provenance(b)
        )
