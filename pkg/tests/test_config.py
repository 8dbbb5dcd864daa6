import pytest
from hypothesis import given
from hypothesis import strategies as st

from plm.config import RunConfig, build_config, dump_config, parse_bias, parse_config_text
from plm.errors import ConfigError


class TestParseBias:
    def test_learning_default(self):
        assert tuple(parse_bias("0.8,0.15,0.05").probs) == pytest.approx((0.8, 0.15, 0.05), abs=1e-15)

    @pytest.mark.parametrize("text", ["1,0", "0.5,0.5,0.5", "a,b,c", "", "0.5,0.5,0,0", "1.1,-0.1,0"])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_bias(text)

    def test_tolerance_edge(self):
        parse_bias("0.8,0.15,0.0500000005")
        with pytest.raises(ConfigError):
            parse_bias("0.8,0.15,0.050001")

    @given(st.integers(0, 100), st.integers(0, 100))
    def test_any_valid_split(self, a, b):
        if a + b > 100:
            return
        sched = parse_bias(f"{a / 100},{b / 100},{(100 - a - b) / 100}")
        assert abs(sum(sched.probs) - 1.0) <= 1e-12


class TestPrecedence:
    def test_defaults(self):
        cfg = RunConfig().resolve("learn")
        assert cfg.bias == "0.8,0.15,0.05" and cfg.iters == 30000 and cfg.replicas == 100
        assert (cfg.init_seed, cfg.split_seed, cfg.sampler_seed, cfg.dither_seed) == (1, 0, 2, 3)

    def test_forget_defaults(self):
        cfg = RunConfig().resolve("forget")
        assert cfg.bias == "0.99,0.01,0"
        assert cfg.iters >= 5000

    def test_file_beats_defaults_flags_beat_file(self):
        file_values = parse_config_text("replicas = 7\nseed = 4\ndropout.rate = 0.25  # comment\n")
        cfg = build_config(file_values, {"replicas": 3}).resolve("learn")
        assert cfg.replicas == 3 and cfg.seed == 4 and cfg.dropout_rate == 0.25
        assert cfg.init_seed == 5

    def test_explicit_seed_overrides_derivation(self):
        cfg = build_config({}, {"seed": 10, "split_seed": 0}).resolve("learn")
        assert cfg.split_seed == 0 and cfg.sampler_seed == 12

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            parse_config_text("nonsense = 1\n")

    def test_bad_line_and_value(self):
        with pytest.raises(ConfigError):
            parse_config_text("replicas\n")
        with pytest.raises(ConfigError):
            parse_config_text("replicas = many\n")

    def test_bool_values(self):
        assert parse_config_text("dither_class_input = yes")["dither_class_input"] is True
        assert parse_config_text("originals = off")["originals"] is False

    @pytest.mark.parametrize("key,value", [("eval_every", 0), ("iters", -1), ("epochs", -2), ("replicas", 0)])
    def test_range_validation(self, key, value):
        with pytest.raises(ConfigError):
            build_config({}, {key: value}).resolve("learn")


def test_dump_parses_back():
    cfg = RunConfig(mnist="data", learning_rate=0.75).resolve("forget")
    assert build_config(parse_config_text(dump_config(cfg))) == cfg
