import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from peerflow.config import FamilySpec, RunConfig
from peerflow.errors import ConfigError
from peerflow.families import Exponential, InversePowerCapacity, PowerGain, PowerLaw, Uniform
from peerflow.market import MarketModel


def test_defaults_are_the_reference_model():
    cfg = RunConfig()
    assert cfg.model() == MarketModel.baseline()
    m = cfg.model()
    assert m.f_u == m.f_v == PowerLaw(0.33)
    assert m.gain == PowerGain(1.0) and m.capacity == InversePowerCapacity(1.0)
    assert (m.c, m.k) == (0.2, 0.2)


def test_parse_comments_blank_lines_and_overrides():
    text = """
    # users
    f_u.family = exponential   # constant hazard
    f_u.rate = 0.5

    f_v.family = uniform
    gain.beta = 2
    c = 0.4
    solver.method = bisect
    seed = 7
    """
    cfg = RunConfig.parse(text)
    m = cfg.model()
    assert m.f_u == Exponential(0.5) and m.f_v == Uniform(0.0, 1.0)
    assert m.gain == PowerGain(2.0) and m.c == 0.4
    assert cfg.settings().method == "bisect" and cfg.seed == 7


@given(
    a=st.floats(0.05, 5.0), beta=st.floats(0.1, 5.0), c=st.floats(0.01, 2.0), k=st.floats(0.0, 1.0),
    tol=st.floats(1e-14, 1e-6), points=st.integers(2, 50), seed=st.integers(0, 2**31),
    axis=st.sampled_from(["alpha", "beta", "c"]), lo=st.none() | st.floats(0.1, 1.0),
)
def test_emit_parse_round_trip(a, beta, c, k, tol, points, seed, axis, lo):
    cfg = dataclasses.replace(
        RunConfig(), f_w=FamilySpec("power", (("exponent", a),)), gain=FamilySpec("power", (("beta", beta),)),
        c=c, k=k, inner_tol=tol, sweep_points=points, seed=seed, sweep_axis=axis, sweep_from=lo,
    )
    assert RunConfig.parse(cfg.emit()) == cfg


@pytest.mark.parametrize("text", [
    "nonsense line",
    "bogus = 1",
    "c = abc",
    "c = 0.2\nc = 0.3",
    "c = -1",
    "f_u.family = cauchy",
    "f_u.rate = 2",
    "solver.method = newton",
    "sweep.axis = gamma",
    "sweep.points = 1",
    "solver.max_iter = 5",
])
def test_bad_input_raises_config_error(text):
    with pytest.raises(ConfigError):
        RunConfig.parse(text)


def test_axis_overrides():
    cfg = RunConfig()
    assert cfg.with_axis("alpha", 2.0).model() == MarketModel.baseline(alpha=2.0)
    assert cfg.with_axis("beta", 0.5).model() == MarketModel.baseline(beta=0.5)
    assert cfg.with_axis("c", 0.1).model() == MarketModel.baseline(c=0.1)
    exp_demand = dataclasses.replace(cfg, f_w=FamilySpec("exponential", (("rate", 1.0),)))
    with pytest.raises(ConfigError):
        exp_demand.with_axis("alpha", 2.0)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / "absent.cfg"))
