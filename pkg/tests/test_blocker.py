import numpy as np
import pytest

from risbeam.blocker import apply_blocker, calibrated_blocker, is_blocked, reconstruct_nlos_ctf
from risbeam.channel import FrequencyGrid, Mpc, MpcSet, NoiseModel, synthesize_ctf
from risbeam.geometry import Direction, GeometryError, RectSurface, direction_between
from risbeam.pipeline import RunFlags, run_pipeline
from risbeam.scenario import Scenario, desk_scenario
from risbeam.scene import scene_to_mpcs

TX = np.array([0.0, 0.0, 0.0])
RX = np.array([2.0, 0.0, 0.0])


def los():
    return Mpc(2.0 / 3e8, 0.0, direction_between(TX, RX), direction_between(RX, TX),
               np.eye(2), "los")


def wall(x, width=1.0, material="absorber"):
    return RectSurface([x, 0, 0], [-1, 0, 0], width, 1.0, material=material, name="blk")


def random_set(rng):
    mpcs = []
    for _ in range(rng.integers(0, 9)):
        src = rng.choice(["los", "scatterer", "whiteboard", "ris", "estimated"])
        if src == "los":
            mpcs.append(los())
            continue
        p = rng.uniform(-3, 3, 3) if src != "estimated" else None
        if p is not None:
            aod, aoa = direction_between(TX, p), direction_between(RX, p)
            length = np.linalg.norm(p - TX) + np.linalg.norm(RX - p)
        else:
            aod = Direction(rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1))
            aoa = Direction(rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1))
            length = rng.uniform(2, 8)
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        mpcs.append(Mpc(length / 3e8, 0.0, aod, aoa, g, str(src), p, p))
    return MpcSet(mpcs)


def random_blocker(rng):
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    return RectSurface(rng.uniform(-1.5, 2.5, 3), n, rng.uniform(0.2, 2), rng.uniform(0.2, 2),
                       rng.uniform(0, np.pi), material="absorber")


def test_blocker_behind_tx_changes_nothing():
    s = MpcSet([los()])
    out = apply_blocker(s, wall(-1.0), TX, RX)
    assert out.mpcs == s.mpcs and out.visibility == "los"


def test_blocker_across_segment_removes_los():
    out = apply_blocker(MpcSet([los()]), wall(1.0), TX, RX)
    assert len(out) == 0 and out.visibility == "nlos"


def test_blocker_must_be_absorber():
    with pytest.raises(ValueError):
        apply_blocker(MpcSet([los()]), wall(1.0, material="metal"), TX, RX)


def test_estimated_path_leg_is_truncated_at_path_length():
    # arrival ray points through the blocker, but the path is shorter than the gap
    m = Mpc(0.5 / 3e8, 0.0, Direction(0, 0), Direction(np.pi, 0), np.eye(2), "estimated")
    assert not is_blocked(m, wall(1.0), TX, RX)
    m = Mpc(5.0 / 3e8, 0.0, Direction(0, 0), Direction(np.pi, 0), np.eye(2), "estimated")
    assert is_blocked(m, wall(1.0), TX, RX)


def test_randomised_blocker_properties():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        s = random_set(rng)
        b = random_blocker(rng)
        try:
            once = apply_blocker(s, b, TX, RX)
        except GeometryError:
            continue
        twice = apply_blocker(once, b, TX, RX)
        assert [id(m) for m in twice] == [id(m) for m in once]
        ids = {id(m) for m in s}
        assert all(id(m) in ids for m in once)
        for mode in ("vv-only", "full-pol"):
            assert once.total_power(mode) <= s.total_power(mode) + 1e-12
        assert (once.visibility == "nlos") == (not once.by_source("los"))


# -- calibrated blocker on the default scene -------------------------------------

@pytest.fixture(scope="module")
def default_run():
    sc = desk_scenario()
    sc.physics.n_freq = 16   # path bookkeeping does not depend on the grid
    return run_pipeline(sc, RunFlags(nlos_from=40, positions=list(range(0, 128, 3)) + [39, 40],
                                     snr_db=[0.0]))


def test_los_absent_from_boundary_on(default_run):
    for st in default_run.states:
        for p, kept in zip(default_run.positions, default_run.paths[st]):
            assert bool(kept.by_source("los")) == (p < 40), (st, p)


def test_ris_and_whiteboard_survive(default_run):
    for st in default_run.states:
        for truth, kept in zip(default_run.truth[st], default_run.paths[st]):
            for src in ("ris", "whiteboard"):
                assert len(kept.by_source(src)) == len(truth.by_source(src))


def test_los_cluster_is_shadowed(default_run):
    i = default_run.positions.index(90)
    truth, kept = default_run.truth["on"][i], default_run.paths["on"][i]
    assert truth.by_source("scatterer") and not kept.by_source("scatterer")


def test_calibration_switches_exactly_at_boundary():
    sc = Scenario()
    lay = sc.layout()
    rx = lay.rx_positions()
    for n in (20, 40, 80):
        b = calibrated_blocker(lay.tx, rx, n, 0.35)
        flags = [is_blocked(scene_to_mpcs(lay, p, "off").by_source("los")[0], b, lay.tx, rx[p])
                 for p in range(128)]
        assert flags == [p >= n for p in range(128)]


def test_calibration_errors():
    rx = np.stack([np.linspace(0, 1, 10), np.ones(10), np.zeros(10)], axis=1)
    with pytest.raises(GeometryError):
        calibrated_blocker([0, 0, 0], rx, 0)
    with pytest.raises(GeometryError):
        calibrated_blocker([0, 0, 0], rx, 10)
    with pytest.raises(GeometryError):
        calibrated_blocker([0, 0, 0], np.zeros((10, 3)) + [1, 1, 0], 5)


# -- reconstruction ----------------------------------------------------------------

def _setup():
    sc = desk_scenario()
    lay = sc.layout()
    tx, rx = sc.arrays()
    return sc, lay, tx, rx, sc.timing(), FrequencyGrid(n=32)


def test_reconstruction_of_unfiltered_set_matches_original():
    sc, lay, tx, rx, timing, grid = _setup()
    s = scene_to_mpcs(lay, 60, "on", sensor=sc.sensor())
    a = reconstruct_nlos_ctf(s, tx, rx, timing, grid, NoiseModel(0.0))
    b = synthesize_ctf(s, tx, rx, timing, grid)
    assert np.array_equal(a.data, b.data)
    n1 = reconstruct_nlos_ctf(s, tx, rx, timing, grid, NoiseModel(0.02, 1)).data - b.data
    assert np.mean(np.abs(n1) ** 2) == pytest.approx(0.02 ** 2, rel=0.05)


def test_reconstruction_of_empty_set_is_noise_only():
    sc, lay, tx, rx, timing, grid = _setup()
    h = reconstruct_nlos_ctf(MpcSet(), tx, rx, timing, grid, NoiseModel(0.02, 3))
    assert np.mean(np.abs(h.data) ** 2) == pytest.approx(0.02 ** 2, rel=0.05)
    assert not reconstruct_nlos_ctf(MpcSet(), tx, rx, timing, grid, NoiseModel(0.0)).data.any()


def test_nlos_energy_below_los_energy():
    sc, lay, tx, rx, timing, grid = _setup()
    b = sc.blocker(lay)
    for p in (40, 70, 120):
        s = scene_to_mpcs(lay, p, "on", sensor=sc.sensor())
        kept = apply_blocker(s, b, lay.tx, lay.rx_positions()[p])
        e_nlos = reconstruct_nlos_ctf(kept, tx, rx, timing, grid, NoiseModel(0.0)).energy()
        assert e_nlos < synthesize_ctf(s, tx, rx, timing, grid).energy()
