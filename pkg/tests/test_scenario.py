import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risbeam.scenario import (Scenario, ScenarioError, desk_scenario, loads_scenario,
                              parse_scenario, serialize_scenario)


def test_empty_file_gives_default_scenario(tmp_path):
    f = tmp_path / "empty.toml"
    f.write_text("")
    sc = parse_scenario(f)
    assert sc == Scenario()
    assert sc.physics.carrier_hz == 28e9
    assert sc.physics.bandwidth_hz == 768e6
    assert sc.scene.n_positions == 128
    assert (sc.ris.rows, sc.ris.cols) == (16, 16)
    tx, rx = sc.arrays()
    assert (tx.size, rx.size) == (128, 256)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_scenario("/nonexistent/scenario.toml")


def test_negative_bandwidth_names_the_field():
    with pytest.raises(ScenarioError, match=r"physics\.bandwidth_hz"):
        loads_scenario("[physics]\nbandwidth_hz = -1\n")


def test_syntax_error_reports_line():
    with pytest.raises(ScenarioError, match="line 3"):
        loads_scenario("[physics]\nn_freq = 64\nbandwidth_hz = = 2\n")


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ScenarioError, match=r"physics\.bandwith_hz \(line 2\): unknown key"):
        loads_scenario("[physics]\nbandwith_hz = 1e9\n")
    with pytest.raises(ScenarioError, match="unknown section"):
        loads_scenario("[camera]\nfps = 30\n")


@pytest.mark.parametrize("text, field", [
    ("[physics]\nn_freq = 1.5\n", "physics.n_freq"),
    ("[scene]\ntx = [0, 1]\n", "scene.tx"),
    ("[scene]\nnlos_from = 0\n", "scene.nlos_from"),
    ("[ris]\namplitude = 2.0\n", "ris.amplitude"),
    ("[estimator]\ndelay_step = 0\n", "estimator.delay_step"),
    ("[analysis]\nwindow = 4\n", "analysis.window"),
    ("[run]\nseed = -1\n", "run.seed"),
    ("[tx_array]\nkind = 'hex'\n", "tx_array.kind"),
    ("[physics]\nsnapshot_time_s = 0.1\n", "physics.snapshot_time_s"),
    ("[[scene.surfaces]]\nname = 'w'\n", "scene.surfaces[0]"),
])
def test_invalid_values_name_their_field(text, field):
    with pytest.raises(ScenarioError, match=field.replace(".", r"\.").replace("[", r"\[")):
        loads_scenario(text)


def test_partial_section_keeps_other_defaults():
    sc = loads_scenario("[physics]\nn_freq = 64\n\n[run]\nseed = 7\n")
    assert sc.physics.n_freq == 64 and sc.run.seed == 7
    assert sc.physics.bandwidth_hz == Scenario().physics.bandwidth_hz


def test_surfaces_replace_the_default_inventory():
    sc = loads_scenario("[[scene.surfaces]]\nname = 'w'\nmaterial = 'wood'\n"
                        "center = [0, -2, 0]\nnormal = [0, 1, 0]\nwidth = 2\nheight = 1\n")
    (s,) = sc.scene.surfaces
    assert s.material == "wood" and s.center == (0.0, -2.0, 0.0)


@pytest.mark.parametrize("sc", [Scenario(), desk_scenario()])
def test_round_trip(sc):
    text = serialize_scenario(sc)
    back = loads_scenario(text)
    assert back == sc
    assert serialize_scenario(back) == text
    assert back.config_hash() == sc.config_hash()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4096), st.floats(1e6, 2e9), st.integers(0, 2 ** 64 - 1),
       st.floats(0, 0.5), st.sampled_from([1, 3, 5, 7, 9]),
       st.lists(st.floats(-20, 40, allow_nan=False), min_size=1, max_size=6),
       st.booleans(), st.integers(15, 112))
def test_round_trip_property(n_freq, bw, seed, noise, window, snrs, est_el, nlos):
    sc = Scenario()
    sc.physics = dataclasses.replace(sc.physics, n_freq=n_freq, bandwidth_hz=bw, noise_std=noise)
    sc.run = dataclasses.replace(sc.run, seed=seed)
    sc.analysis = dataclasses.replace(sc.analysis, window=window, snr_db=tuple(snrs))
    sc.estimator = dataclasses.replace(sc.estimator, search_elevation=est_el)
    sc.scene = dataclasses.replace(sc.scene, nlos_from=nlos)
    sc.validate()
    assert loads_scenario(serialize_scenario(sc)) == sc
