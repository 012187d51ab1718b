import numpy as np
import pytest

from risbeam.channel import synthesize_ctf
from risbeam.constants import SPEED_OF_LIGHT, wavelength
from risbeam.geometry import RectSurface, SceneLayout, Trajectory, specular_image
from risbeam.ris import RisPanel, VisionSensor
from risbeam.scenario import Scenario, desk_scenario
from risbeam.scene import ris_configuration, scene_to_mpcs

TRAJ = Trajectory([0, 0, 0], [1, 0, 0])


def test_free_space_los_only():
    lay = SceneLayout([-1.0, 0, 0], TRAJ, None, [])
    s = scene_to_mpcs(lay, 0, kappa=2.0)
    assert len(s) == 1
    (m,) = s
    assert m.source == "los"
    assert m.delay == pytest.approx(1.0 / SPEED_OF_LIGHT, rel=1e-15)
    assert abs(m.gamma_vv) == pytest.approx(2.0)
    assert s.visibility == "los"


def test_los_doppler_moving_away():
    lay = SceneLayout([-1.0, 0, 0], TRAJ, None, [])
    m = scene_to_mpcs(lay, 20).mpcs[0]
    assert m.doppler == pytest.approx(-0.01 / wavelength(), rel=1e-12)
    assert m.doppler == pytest.approx(-0.934, abs=1e-3)
    assert scene_to_mpcs(lay, 0).mpcs[0].doppler == 0.0


def test_wall_reflection_follows_image_method():
    wall = RectSurface([0.5, -1.0, 0], [0, 1, 0], 6.0, 3.0, material="wood", name="wall")
    tx = np.array([-1.0, 0.5, 0.0])
    lay = SceneLayout(tx, TRAJ, None, [wall])
    s = scene_to_mpcs(lay, 40)
    (m,) = s.by_source("wall")
    rx = lay.rx_positions()[40]
    length = np.linalg.norm(rx - specular_image(tx, wall))
    assert m.delay == pytest.approx(length / SPEED_OF_LIGHT, rel=1e-12)
    assert abs(m.gamma_vv) == pytest.approx(10 ** (-6 / 20) / length, rel=1e-12)
    assert m.first_point[1] == pytest.approx(-1.0)


def test_reflection_outside_surface_is_skipped():
    small = RectSurface([5.0, -1.0, 0], [0, 1, 0], 0.1, 0.1, material="metal", name="tile")
    lay = SceneLayout([-1.0, 0.5, 0], TRAJ, None, [small])
    assert not scene_to_mpcs(lay, 40).by_source("tile")


def test_material_table_override():
    wall = RectSurface([0.5, -1.0, 0], [0, 1, 0], 6.0, 3.0, material="glass", name="wall")
    lay = SceneLayout([-1.0, 0.5, 0], TRAJ, None, [wall])
    a = scene_to_mpcs(lay, 40).by_source("wall")[0]
    b = scene_to_mpcs(lay, 40, material_loss={"glass": 0.0}).by_source("wall")[0]
    assert abs(b.gamma_vv) / abs(a.gamma_vv) == pytest.approx(10 ** (3 / 20))


def test_empty_scene_gives_empty_set():
    # TX behind a large absorber: nothing reaches the RX
    wall = RectSurface([-0.5, 0, 0], [1, 0, 0], 10.0, 10.0, material="absorber")
    lay = SceneLayout([-1.0, 0, 0], TRAJ, None, [wall])
    s = scene_to_mpcs(lay, 20)
    assert len(s) == 0 and s.visibility == "nlos"


def test_bad_position_and_state():
    lay = SceneLayout([-1.0, 0, 0], TRAJ, RisPanel(), [])
    with pytest.raises(IndexError):
        scene_to_mpcs(lay, 128)
    with pytest.raises(ValueError):
        ris_configuration(lay, 0, "dim")


@pytest.fixture(scope="module")
def default_sets():
    sc = Scenario()
    lay = sc.layout()
    kw = dict(sensor=sc.sensor(), ris_visibility_db=sc.ris.visibility_db)
    on = [scene_to_mpcs(lay, p, "on", **kw) for p in range(128)]
    off = [scene_to_mpcs(lay, p, "off", **kw) for p in range(128)]
    return on, off


def test_default_scene_inventory(default_sets):
    on, _ = default_sets
    sources = {m.source for m in on[20]}
    assert {"los", "whiteboard", "ris", "scatterer"} <= sources


def test_ris_path_visibility_on_versus_off(default_sets):
    on, off = default_sets
    seen_on = np.array([bool(s.by_source("ris")) for s in on])
    seen_off = np.array([bool(s.by_source("ris")) for s in off])
    # on: tracked over the whole trajectory, except a short stretch around the
    # specular point where the range-defocused 1-bit beam dips
    assert seen_on[:60].all() and seen_on[100:].all()
    assert seen_on.sum() >= 115
    # off: the panel behaves as a small mirror, visible only near its specular band
    assert 0 < seen_off.sum() < 50
    idx = np.flatnonzero(seen_off)
    assert np.all(np.diff(idx) == 1)
    assert seen_on.sum() > 2 * seen_off.sum()


def test_static_head_positions_are_identical():
    sc = desk_scenario()
    lay = sc.layout()
    tx, rx = sc.arrays()
    sets = [scene_to_mpcs(lay, p, "on", sensor=sc.sensor()) for p in range(14)]
    ctfs = [synthesize_ctf(s, tx, rx, sc.timing(), sc.grid()).data for s in sets]
    for c in ctfs[1:]:
        assert np.array_equal(c, ctfs[0])


def test_update_cadence_holds_configuration():
    sc = Scenario()
    lay = sc.layout()
    sens = VisionSensor(angular_std=0.01)
    a = ris_configuration(lay, 20, "on", sensor=sens, seed=3, update_every=4)
    b = ris_configuration(lay, 23, "on", sensor=sens, seed=3, update_every=4)
    c = ris_configuration(lay, 24, "on", sensor=sens, seed=3, update_every=4)
    assert a == b
    assert a != c
