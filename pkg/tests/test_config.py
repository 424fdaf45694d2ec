import pytest

from eljunction.config import (
    ANNOTATED_EXAMPLE,
    RunConfig,
    parse_config,
    parse_config_text,
    reproduction_config,
)
from eljunction.errors import ValidationError
from eljunction.model import ModelParams


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.toml"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg.model == ModelParams()
    assert cfg.model.omega == pytest.approx(2.9619, abs=1e-4)
    assert cfg.N_values == (2,)
    assert cfg.W_values == (1.0, 10.0)
    assert cfg.ensemble.realizations == 100
    assert cfg.analysis.cutoff == 1e-2
    assert cfg.propagator.K == 256


def test_annotated_example_is_the_default():
    assert parse_config_text(ANNOTATED_EXAMPLE) == parse_config_text("")


def test_omega_shortcut():
    cfg = parse_config_text('[model]\nh = 1.0\nM = 6\nomega = "2*Omega0"')
    assert cfg.model.omega == pytest.approx(2.9619, abs=1e-4)
    assert parse_config_text("[model]\nomega = 4.5").model.omega == 4.5


@pytest.mark.parametrize(
    "text,key",
    [
        ("[model]\nW = -1", "model.W"),
        ("[model]\nW = [1.0, -2.0]", "model.W"),
        ("[model]\nomegaa = 1", "model.omegaa"),
        ("[modle]\nW = 1", "modle"),
        ('[model]\nomega = "3*Omega0"', "model.omega"),
        ("[model]\nomega = 0", "model.omega"),
        ("[model]\nL = 10\nM = 6", "model.L"),
        ("[model]\nN = 1.5", "model.N"),
        ("[ensemble]\nrealizations = 0", "ensemble.realizations"),
        ("[propagator]\nK = 255", "propagator.K"),
        ("[analysis]\ngraph = 1", "analysis.graph"),
        ('[analysis]\npr_mode = "x"', "analysis.pr_mode"),
        ("[classical]\nomega_range = [2.0, 1.0]", "classical.omega_range"),
        ("[output]\nout = 3", "output.out"),
        ("[model]\nh = 0", "model.h"),
    ],
)
def test_validation_names_key(text, key):
    with pytest.raises(ValidationError) as err:
        parse_config_text(text)
    assert err.value.key == key


def test_w_error_mentions_constraint():
    with pytest.raises(ValidationError, match=">= 0"):
        parse_config_text("[model]\nW = -1")


def test_lists_and_combinations():
    cfg = parse_config_text("[model]\nN = [1, 2, 3]\nW = 5.0")
    assert cfg.combinations() == [(1, 5.0), (2, 5.0), (3, 5.0)]
    assert cfg.params(3, 5.0).N == 3


def test_missing_file_and_bad_toml(tmp_path):
    with pytest.raises(ValidationError):
        parse_config(tmp_path / "nope.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    with pytest.raises(ValidationError):
        parse_config(bad)


def test_to_dict_resolved():
    d = parse_config_text("").to_dict()
    assert d["model"]["omega"] == pytest.approx(2.9619, abs=1e-4)
    assert d["model"]["N"] == [2]
    assert d["ensemble"]["realizations"] == 100


def test_reproduction_config():
    cfg = reproduction_config()
    assert isinstance(cfg, RunConfig)
    assert cfg.N_values == (1, 2, 3)
    assert cfg.W_values == (1.0, 10.0)
    assert cfg.ensemble.realizations == 100
