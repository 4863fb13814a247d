"""Tests for the run configuration and its key=value format."""
from pathlib import Path

import pytest

from mumkit.errors import ConfigurationError
from mumkit.model.config import UnmixSite
from mumkit.teacher import TeacherMode
from mumkit.training.config import AugmentMode
from mumkit.utils.config import (
    RunConfig,
    apply_env_overrides,
    describe_defaults,
    dump_run_config,
    load_run_config,
    override,
    parse_run_config,
)

DEFAULT_CONF = Path(__file__).resolve().parents[1] / "src" / "mumkit" / "apps" / "default.conf"


class TestParse:
    """Test suite for parsing configuration text."""

    def test_empty_text_gives_defaults(self) -> None:
        """Omitted keys keep their defaults."""
        assert parse_run_config("") == RunConfig()

    def test_values_and_comments(self) -> None:
        """Scalars, enums, booleans and tuples parse; comments are ignored."""
        cfg = parse_run_config(
            "# a comment\n"
            "train.teacher_mode=ema   # inline\n"
            "train.decay=0.999\n"
            "train.affine=false\n"
            "train.lr_decay_epochs=10,15\n"
            "model.unmix_site=after_decoder\n"
            "mix.n_group=2\n"
        )
        assert cfg.train.teacher_mode is TeacherMode.EMA
        assert cfg.train.decay == 0.999
        assert cfg.train.affine is False
        assert cfg.train.lr_decay_epochs == (10, 15)
        assert cfg.model.unmix_site is UnmixSite.AFTER_DECODER
        assert cfg.mix.n_group == 2

    def test_pairs_and_empty_tuple(self) -> None:
        """Pairs use ':'; an empty value is an empty tuple."""
        cfg = parse_run_config("data.skeleton.flip_pairs=2:3\ntrain.lr_decay_epochs=\n")
        assert cfg.data.skeleton.flip_pairs == ((2, 3),)
        assert cfg.train.lr_decay_epochs == ()

    def test_unknown_key(self) -> None:
        """Misspelled keys are rejected with their line number."""
        with pytest.raises(ConfigurationError, match="unknown key 'train.lamda_u'"):
            parse_run_config("train.lambda_u=1.0\ntrain.lamda_u=2.0\n", "run.conf")

    def test_duplicate_key(self) -> None:
        """A key may appear once."""
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_run_config("mix.n_group=2\nmix.n_group=4\n")

    def test_missing_equals(self) -> None:
        """Lines without '=' are malformed."""
        with pytest.raises(ConfigurationError, match=":1:"):
            parse_run_config("mix.n_group 2\n")

    def test_invalid_value_names_field(self) -> None:
        """Validation errors name the offending field."""
        with pytest.raises(ConfigurationError, match="train.decay"):
            parse_run_config("train.decay=1.5\n")

    def test_sections_must_agree(self) -> None:
        """A model input size different from the data image size is rejected."""
        with pytest.raises(ConfigurationError, match="input_size"):
            parse_run_config("model.input_size=32,48\nmodel.heatmap_size=8,12\n")

    def test_tile_grid_must_divide(self) -> None:
        """A grid that does not divide the mix sites is a configuration error."""
        with pytest.raises(ConfigurationError, match="n_tiles_h"):
            parse_run_config("mix.n_tiles_h=5\n")


class TestDump:
    """Test suite for writing configurations back out."""

    def test_dump_loads_back(self) -> None:
        """A dumped non-default configuration parses to the same object."""
        cfg = override(
            RunConfig(),
            {
                "train.augment": "mum_joint_cutout",
                "train.lr_decay_epochs": (5,),
                "train.lambda_u": 0.1,
                "data.skeleton.flip_pairs": ((2, 3), (6, 7)),
                "mix.identity_masks": True,
            },
        )
        assert parse_run_config(dump_run_config(cfg)) == cfg

    def test_dump_format(self) -> None:
        """Enums as values, booleans lower-case, floats by repr."""
        text = dump_run_config(RunConfig())
        assert "train.teacher_mode=eman\n" in text
        assert "mix.image_mix=true\n" in text
        assert "train.lr=0.001\n" in text
        assert "data.skeleton.flip_pairs=2:3,4:5,6:7\n" in text
        assert describe_defaults() == text

    def test_shipped_default_file(self) -> None:
        """default.conf spells out the defaults."""
        assert load_run_config(DEFAULT_CONF) == RunConfig()


class TestOverrides:
    """Test suite for programmatic and environment overrides."""

    def test_override_validates(self) -> None:
        """Overrides go through the same validation."""
        cfg = override(RunConfig(), {"train.augment": AugmentMode.MUM})
        assert cfg.train.augment is AugmentMode.MUM
        with pytest.raises(ConfigurationError):
            override(RunConfig(), {"train.nope": 1})

    def test_seed_env(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """MUMKIT_SEED sets both seeds."""
        monkeypatch.setenv("MUMKIT_SEED", "7")
        cfg = apply_env_overrides(RunConfig())
        assert (cfg.train.seed, cfg.data.seed) == (7, 7)

    def test_seed_env_unset(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Without the variable the configuration is unchanged."""
        monkeypatch.delenv("MUMKIT_SEED", raising=False)
        cfg = RunConfig()
        assert apply_env_overrides(cfg) is cfg

    def test_seed_env_not_integer(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A non-numeric seed is a configuration error."""
        monkeypatch.setenv("MUMKIT_SEED", "seven")
        with pytest.raises(ConfigurationError, match="MUMKIT_SEED"):
            apply_env_overrides(RunConfig())
