import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptconserve import __version__, pipeline
from ptconserve.errors import ConfigError
from ptconserve.pipeline import ScenarioConfig

FAST = dict(samples=60, tmax=5.0)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config ---------------------------------------------------------------------

def test_defaults():
    cfg = ScenarioConfig()
    assert (cfg.d, cfg.J, cfg.gamma, cfg.state, cfg.samples) == (4, 1.0, 0.0, "psi1", 400)
    assert cfg.tmax is None and cfg.tol is None


def test_parse_with_comments_and_aliases():
    text = """
    # four sites just past the threshold
    d = 4
    gamma = 1.2   # in units of J
    initial_state = psi3
    t_max = 6
    outputs = norm, fits
    window = 4, 6
    """
    cfg = pipeline.parse_config_text(text)
    assert cfg.gamma == 1.2 and cfg.state == "psi3" and cfg.tmax == 6.0
    assert cfg.outputs == ("norm", "fits")
    assert cfg.window == (4.0, 6.0)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("d = 4\ngamma = lots\n", "cfg.txt:2: key 'gamma'"),
        ("d = 4\ncolour = red\n", "cfg.txt:2: unknown key 'colour'"),
        ("d 4\n", "cfg.txt:1: expected 'key = value'"),
        ("\n\nd = 1\n", "cfg.txt:3: field 'd'"),
        ("gamma = -0.5\n", "cfg.txt:1: field 'gamma'"),
        ("outputs = norm,plots\n", "field 'outputs'"),
        ("window = 5\n", "key 'window'"),
        ("window = 6, 5\n", "field 'window'"),
        ("samples = 1\n", "field 'samples'"),
    ],
)
def test_config_errors_name_the_location(text, fragment):
    with pytest.raises(ConfigError) as exc:
        pipeline.parse_config_text(text, "cfg.txt")
    assert fragment in str(exc.value)


configs = st.builds(
    ScenarioConfig,
    d=st.integers(2, 12),
    J=st.floats(0.01, 100.0),
    gamma=st.floats(0.0, 100.0),
    state=st.sampled_from(["psi1", "psi2", "psi3", "psi4", "E1", "v2", "1, 0.5j, 0, 0"]),
    tmax=st.one_of(st.none(), st.floats(0.001, 1e4)),
    samples=st.integers(2, 5000),
    outputs=st.lists(st.sampled_from(pipeline.OUTPUTS), unique=True).map(tuple),
    seed=st.integers(0, 2**31),
    tol=st.one_of(st.none(), st.floats(1e-15, 1.0)),
    window=st.one_of(st.none(), st.tuples(st.floats(0, 10), st.floats(10.5, 100))),
    max_norm=st.floats(1.0, 1e4),
)


@settings(max_examples=200)
@given(configs)
def test_config_text_round_trip(cfg):
    assert pipeline.parse_config_text(cfg.to_text()) == cfg


def test_echo_round_trips_through_json():
    cfg = ScenarioConfig(gamma=0.2, window=(1.0, 2.0), outputs=("norm",))
    echoed = json.loads(json.dumps(cfg.echo()))
    rebuilt = ScenarioConfig.from_mapping({k: ",".join(map(str, v)) if isinstance(v, list) else str(v)
                                           for k, v in echoed.items() if v is not None})
    assert rebuilt == cfg


def test_resolve_state_amplitudes():
    from ptconserve.model import build_hpt

    m = build_hpt(3)
    assert np.allclose(pipeline.resolve_state("1, 1j, -0.5", m), [1, 1j, -0.5])
    for bad in ("1, 2", "0, 0, 0", "a, b, c", "psi9"):
        with pytest.raises(ConfigError):
            pipeline.resolve_state(bad, m)


# -- runs -----------------------------------------------------------------------

def test_default_tmax_follows_phase():
    assert pipeline.default_tmax("exceptional_point") == 200.0
    assert pipeline.default_tmax("pt_broken") == 8.0
    assert pipeline.default_tmax("pt_symmetric") == 20.0


def test_run_writes_documented_files(tmp_path):
    cfg = ScenarioConfig(gamma=0.2, **FAST)
    rec = pipeline.run_scenario(cfg, tmp_path)
    for name in rec.files.values():
        assert (tmp_path / name).exists()
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0] == (
        ["t", "re_a1", "re_a2", "re_a3", "re_a4", "im_a1", "im_a2", "im_a3", "im_a4", "norm"]
        + ["eta_1", "eta_2", "eta_3", "eta_4", "theta_2", "theta_3", "theta_4"]
        + ["phi_1", "phi_2", "phi_3", "phi_4"]
    )
    assert len(rows) == 61
    # psi1 at t = 0: the phase differences are undefined and left empty
    assert rows[1][14:17] == ["", "", ""]
    assert all(rows[2][14:17])
    # 17 significant digits survive a round trip
    assert float(rows[5][0]) == np.linspace(0, 5, 60)[4]

    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["version"] == __version__
    assert summary["config"]["gamma"] == 0.2
    assert summary["summary"]["units"]["t"] == "1/J"
    assert "phase_tol" in summary["summary"]["tolerances"]
    assert summary["summary"]["conservation"]["passed"]
    assert len(read_csv(tmp_path / "spectrum.csv")) == 5


def test_outputs_are_byte_identical(tmp_path):
    cfg = ScenarioConfig(gamma=1.2, state="psi4", seed=7, **FAST)
    a, b = tmp_path / "a", tmp_path / "b"
    pipeline.run_scenario(cfg, a)
    pipeline.run_scenario(cfg, b)
    for name in ("trajectory.csv", "spectrum.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_echoed_config_reruns_identically(tmp_path):
    cfg = ScenarioConfig(gamma=0.5, state="v3", **FAST)
    rec = pipeline.run_scenario(cfg, tmp_path / "a")
    again = pipeline.parse_config_text(ScenarioConfig(**{
        k: tuple(v) if isinstance(v, list) else v for k, v in rec.config.items()
    }).to_text())
    pipeline.run_scenario(again, tmp_path / "b")
    assert (tmp_path / "a/trajectory.csv").read_bytes() == (tmp_path / "b/trajectory.csv").read_bytes()


def test_norm_only_run_skips_spectrum(tmp_path):
    rec = pipeline.run_scenario(ScenarioConfig(outputs=("norm",), **FAST), tmp_path)
    assert set(rec.files) == {"norm", "summary"}
    assert not (tmp_path / "spectrum.csv").exists()


@pytest.mark.parametrize(
    "gamma, key, expected",
    [
        (0.2, "norm_period", 2 * math.pi / math.sqrt(0.96)),
        (1.2, "norm_exponential", 3 * math.sqrt(0.44)),
    ],
)
def test_fits_follow_phase(tmp_path, gamma, key, expected):
    cfg = ScenarioConfig(gamma=gamma, outputs=("norm", "fits"), samples=400, tmax=40.0 if gamma < 1 else None)
    fits = pipeline.run_scenario(cfg, tmp_path).summary["fits"]
    assert fits[key]["value"] == pytest.approx(expected, rel=0.02)


def test_fit_errors_are_recorded(tmp_path):
    cfg = ScenarioConfig(gamma=0.2, outputs=("norm", "fits"), samples=50, tmax=3.0)
    fits = pipeline.run_scenario(cfg, tmp_path).summary["fits"]
    assert "TooFew" in fits["error"] or "maxima" in fits["error"]


def test_broken_runs_are_capped(tmp_path):
    cfg = ScenarioConfig(gamma=3.0, outputs=("norm",), samples=50, tmax=30.0)
    s = pipeline.run_scenario(cfg, tmp_path).summary
    assert s["t_max_effective"] < 30.0
    assert s["norm_max"] <= 1e12


# -- figures --------------------------------------------------------------------

@pytest.mark.parametrize("figure", ["fig1d", "fig2", "fig3eg", "fig3h"])
def test_repro_figures_pass(tmp_path, figure):
    rec = pipeline.repro(figure, tmp_path)
    assert rec.summary["passed"], rec.summary["checks"]
    assert (tmp_path / "summary.json").exists()
    for name in rec.files.values():
        assert (tmp_path / name).exists()


def test_repro_unknown_figure():
    with pytest.raises(ConfigError):
        pipeline.repro("fig9", "unused")
