"""Tests for lib.schema."""

import pytest
from omegaconf import OmegaConf
from pydantic import ValidationError

from lib.runs_config import get_preset_path
from lib.schema import ModelConfig, ObservableConfig, SolverConfig
from thermo.errors import AlphabetError, ConfigError


def _preset(name: str) -> ModelConfig:
    data = OmegaConf.to_container(OmegaConf.load(get_preset_path(name)), resolve=True)
    return ModelConfig.model_validate(data)


class TestModelConfig:
    """Tests for ModelConfig validation and build."""

    def test_defaults_are_classical_three_state(self):
        """An empty config is the uniform three-symbol indicator model."""
        pf = ModelConfig().build()

        assert pf.q == 3
        assert pf.alphabet.size == 3
        assert pf.transition.is_full
        assert pf.value([0.0, 0.0, 0.0]) == 0.0

    @pytest.mark.parametrize(("name", "q"), [("classical_cwp", 3), ("curie_weiss", 1), ("golden_mean", 1), ("xy", 2)])
    def test_presets_build(self, name, q):
        """Every bundled preset validates and assembles."""
        config = _preset(name)

        assert config.build().q == q

    def test_golden_mean_counting(self):
        """The golden-mean preset uses counting weights, so H_top = log of the golden ratio."""
        pf = _preset("golden_mean").build()

        assert pf.h_top == pytest.approx(0.48121182505960347, abs=1e-13)

    def test_circle_rejects_transition(self):
        """Circle alphabets cannot carry a transition table."""
        with pytest.raises(ValidationError, match="Circle"):
            ModelConfig.model_validate(
                {"alphabet": {"kind": "circle"}, "potential": {"kind": "xy"}, "transition": [[1]]}
            )

    def test_negative_beta(self):
        """beta must be non-negative."""
        with pytest.raises(ValidationError):
            ModelConfig.model_validate({"beta": -1.0})

    def test_transition_inside_alphabet(self):
        """A transition table written in the alphabet block constrains the shift."""
        config = ModelConfig.model_validate(
            {
                "alphabet": {"kind": "finite", "labels": [0, 1], "transition": [[0, 1], [1, 1]]},
                "potential": {"kind": "table", "table": [[0.0], [1.0]]},
                "counting": True,
            }
        )

        pf = config.build()

        assert config.transition == [[0, 1], [1, 1]]
        assert not pf.transition.is_full
        assert pf.h_top == pytest.approx(0.48121182505960347, abs=1e-13)

    def test_same_transition_in_both_places(self):
        """Repeating the same table at top level is accepted."""
        table = [[0, 1], [1, 1]]
        config = ModelConfig.model_validate(
            {
                "alphabet": {"labels": [0, 1], "transition": table},
                "transition": table,
                "potential": {"kind": "table", "table": [[0.0], [1.0]]},
            }
        )

        assert config.transition == table

    def test_conflicting_transitions(self):
        """Different tables at top level and in the alphabet block are refused."""
        with pytest.raises(ValidationError, match="transition"):
            ModelConfig.model_validate(
                {"alphabet": {"labels": [0, 1], "transition": [[0, 1], [1, 1]]}, "transition": [[1, 1], [1, 1]]}
            )

    @pytest.mark.parametrize(
        "data",
        [
            {"betta": 1.0},
            {"alphabet": {"lables": [0, 1]}},
            {"potential": {"kind": "indicators", "dept": 1}},
            {"solver": {"tolerance": 1e-9}},
            {"observable": {"kind": "cylinder", "patern": [1]}},
        ],
    )
    def test_unknown_keys_rejected(self, data):
        """Misspelled keys fail validation instead of falling back to defaults."""
        with pytest.raises(ValidationError, match="Extra inputs"):
            ModelConfig.model_validate(data)

    def test_unknown_potential_kind(self):
        """Potential kinds are a closed set."""
        with pytest.raises(ValidationError):
            ModelConfig.model_validate({"potential": {"kind": "ising"}})

    def test_depth_mismatch(self):
        """A declared depth must match the table."""
        config = ModelConfig.model_validate(
            {"alphabet": {"labels": [0, 1]}, "potential": {"kind": "table", "table": [[0.0], [1.0]], "depth": 2}}
        )

        with pytest.raises(ConfigError, match="depth"):
            config.build()

    def test_dimension_mismatch(self):
        """A declared q must match the potential."""
        config = ModelConfig.model_validate({"potential": {"kind": "indicators", "q": 2}})

        with pytest.raises(ConfigError, match="q="):
            config.build()

    def test_potential_alphabet_mismatch(self):
        """The xy potential needs a circle."""
        with pytest.raises(AlphabetError):
            ModelConfig.model_validate({"potential": {"kind": "xy"}}).build()

    def test_observable_required(self):
        """Commands that need an observable fail cleanly without one."""
        config = ModelConfig()

        with pytest.raises(ConfigError, match="observable"):
            config.build_observable(config.build())

    def test_builds_cylinder_observable(self):
        """Cylinder patterns are given in labels."""
        config = _preset("curie_weiss")
        pf = config.build()

        observable = config.build_observable(pf)

        assert observable.depth == 2
        assert observable(pf.alphabet.values[[[0, 0], [0, 1]]]).tolist() == [1.0, 0.0]


class TestSolverConfig:
    """Tests for SolverConfig."""

    def test_to_settings(self):
        """Config fields carry over to the solver settings."""
        settings = SolverConfig(tol=1e-10, dense_limit=64, word_cap=1000).to_settings(threads=4)

        assert settings.tol == 1e-10
        assert settings.dense_limit == 64
        assert settings.word_cap == 1000
        assert settings.threads == 4

    def test_rejects_non_positive_tolerance(self):
        """tol must be positive."""
        with pytest.raises(ValidationError):
            SolverConfig(tol=0.0)


class TestObservableConfig:
    """Tests for ObservableConfig."""

    def test_rejects_unknown_kind(self):
        """Observable kinds are a closed set."""
        with pytest.raises(ValidationError):
            ObservableConfig.model_validate({"kind": "magnetization"})
