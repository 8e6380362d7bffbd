import math

import numpy as np
import pytest

from nesscurrent import io
from nesscurrent.config import ConfigError, load_config, resolve_model
from nesscurrent.models import builtin


def test_defaults_per_command():
    cfg = load_config("sumrule")
    assert cfg.rows == ((16, 16), (32, 16), (64, 16), (16, 128))
    assert cfg.state == {"kind": "boosted-fermi", "filling": 0.5, "boost": math.pi / 8}
    assert cfg.window == {"shape": "gaussian", "sigma": 1.5, "T": 6.0, "dt": 0.05}
    assert load_config("cone").state == {"kind": "infinite-temperature"}


def test_overrides_and_file_merge(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[sumrule]\nrows = [[8, 4]]\nring = 64\n[window]\nsigma = 1.0\nT = 4.0\n[state]\nboost = 0.2\n')
    cfg = load_config("sumrule", config_path=str(path))
    assert cfg.rows == ((8, 4),) and cfg.ring == 64
    assert cfg.window["sigma"] == 1.0 and cfg.state["boost"] == 0.2
    cfg = load_config("sumrule", config_path=str(path), overrides={"L": 12, "M": 3, "ring": 128, "sigma": 0.8})
    assert cfg.rows == ((12, 3),) and cfg.ring == 128 and cfg.window["sigma"] == 0.8


def test_model_sources(tmp_path):
    f = tmp_path / "m.toml"
    f.write_text('[model]\nbuiltin = "xxz"\nparams.lambda = 0.25\n')
    assert resolve_model(str(f)) == builtin("xxz", {"lambda": 0.25})
    assert resolve_model("model=xxz, lambda=0.25") == builtin("xxz", {"lambda": 0.25})
    assert resolve_model({"builtin": "xxz", "params": {"lambda": 0.25}}) == builtin("xxz", {"lambda": 0.25})
    with pytest.raises(ConfigError, match="not found"):
        resolve_model(str(tmp_path / "missing.toml"))


@pytest.mark.parametrize(
    "overrides,match",
    [({"L": 4}, "together"), ({"ring": 1}, "ring"), ({"window": "boxcar"}, "shape"), ({"sigma": -1.0}, "sigma")],
)
def test_invalid_configs(overrides, match):
    with pytest.raises(ConfigError, match=match):
        load_config("sumrule", overrides=overrides)


def test_invalid_state_and_syntax(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[state]\nkind = 'hot'\n")
    with pytest.raises(ConfigError, match="state.kind"):
        load_config("sumrule", config_path=str(p))
    p.write_text("[run\n")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config("sumrule", config_path=str(p))


def test_digest_ignores_output_directory():
    a = load_config("spectrum", overrides={"out": "a"})
    b = load_config("spectrum", overrides={"out": "b"})
    assert a.digest() == b.digest()
    assert a.digest() != load_config("spectrum", overrides={"zmax": 10}).digest()


def test_format_value():
    assert io.format_value(0.1) == "0.10000000000000001"
    assert io.format_value(True) == "1" and io.format_value(np.bool_(False)) == "0"
    assert io.format_value(np.int64(-3)) == "-3"
    assert io.format_value(float("inf")) == "inf" and io.format_value(float("nan")) == "nan"
    assert float(io.format_value(math.pi)) == math.pi


def test_csv_text_layout():
    text = io.csv_text(("a", "b"), [(1, 0.5), (2, "x")])
    assert text == "a,b\n1,0.5\n2,x\n"
    with pytest.raises(ValueError):
        io.csv_text(("a", "b"), [(1,)])
