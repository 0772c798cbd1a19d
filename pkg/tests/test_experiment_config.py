"""
Tests for models/experiment_config.py

Validates:
- key = value parsing
- Defaults from ConfigManager, file values and CLI overrides
- Validation of sizes, names and noise admissibility
"""

from pathlib import Path

import pytest

from core import constants
from core.algebra import GhzLabel
from core.config_manager import ConfigManager
from core.exceptions import ConfigError, NoiseModelError
from models.experiment_config import ExperimentConfig, parse_config_text

EXPERIMENTS = Path(__file__).parent.parent / "config" / "experiments"


class TestParseConfigText:
    """Flat key = value files."""

    def test_comments_and_blank_lines(self):
        """Comments and blank lines are skipped, spaces trimmed."""
        text = "# header\n\nL = 4   # inline\nnoise.kind=white\n"
        assert parse_config_text(text) == {"L": "4", "noise.kind": "white"}

    def test_missing_equals(self):
        """A line without '=' names the file and line."""
        with pytest.raises(ConfigError, match="conf:2"):
            parse_config_text("L = 3\nN 2000\n", "conf")

    def test_empty_key(self):
        """'= value' raises."""
        with pytest.raises(ConfigError):
            parse_config_text("= 3\n")

    def test_last_value_wins(self):
        """A repeated key keeps its last value."""
        assert parse_config_text("M = 10\nM = 20\n")["M"] == "20"


class TestConstruction:
    """Defaults, files and overrides."""

    def test_defaults_follow_settings(self):
        """defaults() reads the application settings."""
        ConfigManager.get_instance().set("experiment.N", 500)
        ConfigManager.get_instance().set("experiment.protocol", "all")
        config = ExperimentConfig.defaults()
        assert config.N == 500
        assert config.protocols == constants.PROTOCOL_NAMES
        assert config.seed == 20240601
        assert config.target == GhzLabel.parse("+000")

    def test_from_mapping(self):
        """Every key family parses into its field."""
        config = ExperimentConfig.from_mapping({
            "L": "4", "N": "100", "M": "40", "target": "-0110", "protocol": "proposed, dfe",
            "noise.model": "iid", "noise.kind": "dephased", "noise.coherence": "0.5",
            "f": "0.9", "vectorized": "no", "workers": "3",
        })
        assert (config.L, config.N, config.M) == (4, 100, 40)
        assert config.target == GhzLabel.parse("-0110")
        assert config.protocols == ("proposed", "dfe")
        assert config.noise.kind == "dephased"
        assert config.noise.param("coherence") == 0.5
        assert config.vectorized is False
        assert config.workers == 3
        assert config.validate() is config

    def test_target_parts(self):
        """Sign and t can be given separately."""
        config = ExperimentConfig.from_mapping({"target.sign": "-", "target.t": "010"})
        assert str(config.target) == "-010"

    def test_changing_l_resizes_default_target(self):
        """An all-zero t follows the new length."""
        config = ExperimentConfig.from_mapping({"L": "5"})
        assert config.target == GhzLabel.parse("+00000")

    def test_changing_l_keeps_the_sign(self):
        """Only t is resized; the sign survives."""
        base = ExperimentConfig(target=GhzLabel.parse("-000"))
        assert base.with_overrides(L=4).target == GhzLabel.parse("-0000")

    def test_changing_l_refuses_to_drop_a_custom_t(self):
        """A non-zero t cannot be resized silently."""
        base = ExperimentConfig(target=GhzLabel.parse("+011"))
        with pytest.raises(ConfigError, match="set target as well"):
            base.with_overrides(L=4)

    def test_changing_l_with_a_new_target(self):
        """Giving L and target together is fine."""
        base = ExperimentConfig(target=GhzLabel.parse("+011"))
        assert base.with_overrides(L=4, target="-0110").target == GhzLabel.parse("-0110")

    def test_guhne_share_defaults_to_settings(self):
        """The share comes from protocols.guhne_population_share."""
        ConfigManager.get_instance().set("protocols.guhne_population_share", 1 / 3)
        assert ExperimentConfig.defaults().guhne_share == pytest.approx(1 / 3)

    def test_guhne_share_key(self):
        """Experiment files can set the share."""
        config = ExperimentConfig.from_mapping({"guhne_share": "0.25"})
        assert config.guhne_share == 0.25

    def test_unknown_key(self):
        """Unknown keys raise."""
        with pytest.raises(ConfigError, match="Unknown config key"):
            ExperimentConfig.from_mapping({"temperature": "3"})

    @pytest.mark.parametrize("key,value", [("N", "many"), ("target", "+100"), ("vectorized", "maybe"),
                                           ("noise.kind", "pink"), ("p_dark", "x")])
    def test_bad_values(self, key, value):
        """Unparsable values raise ConfigError."""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping({key: value})

    def test_from_file(self, tmp_path):
        """Files resize the default target and set delta."""
        path = tmp_path / "exp.conf"
        path.write_text("L = 2\nN = 50\nM = 10\nprotocol = all\ndelta = 1.0\n", encoding="utf-8")
        config = ExperimentConfig.from_file(path)
        assert config.L == 2 and config.target == GhzLabel.parse("+00")
        assert config.delta == 1.0
        assert config.correlation == 0.0

    def test_missing_file(self, tmp_path):
        """An unreadable file raises ConfigError."""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "nope.conf")

    def test_shipped_experiment_files_validate(self):
        """Every file under config/experiments validates."""
        for name in ("dark_count.conf", "iid_white.conf", "adversarial.conf"):
            config = ExperimentConfig.from_file(EXPERIMENTS / name)
            assert config.validate().N == 2000

    def test_overrides_ignore_none(self):
        """None overrides leave the config untouched."""
        base = ExperimentConfig(seed=3)
        assert base.with_overrides(seed=None, trials=None) is base
        assert base.with_overrides(seed=9, trials=5).seed == 9

    def test_overrides_protocol_list(self):
        """protocol=all selects every protocol."""
        config = ExperimentConfig().with_overrides(protocol="all")
        assert config.protocols == constants.PROTOCOL_NAMES

    def test_to_dict_is_plain(self):
        """to_dict holds only JSON-ready values."""
        data = ExperimentConfig(noise_model="iid").to_dict()
        assert data["target"] == "+000"
        assert data["noise"] == {"kind": "white"}
        assert data["protocols"] == ["proposed"]
        assert data["guhne_share"] == 0.5


class TestValidation:
    """validate()."""

    @pytest.mark.parametrize("changes", [
        {"L": 1}, {"M": 0}, {"M": 2000}, {"trials": 0}, {"seed": -1},
        {"batch_size": 0}, {"protocols": ()}, {"protocols": ("tomography",)},
        {"noise_model": "bursty"}, {"guhne_share": 0.0}, {"guhne_share": 1.0},
    ])
    def test_config_errors(self, changes):
        """Out-of-range sizes, names and shares raise ConfigError."""
        with pytest.raises(ConfigError):
            ExperimentConfig(**changes).validate()

    def test_target_length_mismatch(self):
        """The target must have L qubits."""
        with pytest.raises(ConfigError):
            ExperimentConfig(L=3, target=GhzLabel.parse("+00")).validate()

    def test_inadmissible_dark_counts(self):
        """delta above its bound raises NoiseModelError."""
        with pytest.raises(NoiseModelError):
            ExperimentConfig(p_dark=0.8, delta=1.5).validate()

    def test_unreachable_iid_fidelity(self):
        """White noise cannot push f below 1/2^L."""
        with pytest.raises(NoiseModelError):
            ExperimentConfig(noise_model="iid", f=0.05).validate()

    def test_dark_count_model(self):
        """The chain model takes p_dark, delta and seed."""
        model = ExperimentConfig(p_dark=0.3, delta=0.7, seed=4).dark_count_model()
        assert (model.p_dark, model.delta, model.seed) == (0.3, 0.7, 4)
