"""Synthesize a three-path channel at 20 dB SNR and extract the paths again."""

import numpy as np

from risbeam.arrays import SounderTiming, octagonal_array, planar_array
from risbeam.channel import FrequencyGrid, Mpc, NoiseModel, synthesize_ctf
from risbeam.geometry import Direction
from risbeam.sage import EstimatorConfig, estimate_paths

tx = planar_array(8, 8, dual_pol=False)
rx = octagonal_array(8, 1, 2, dual_pol=False)
grid = FrequencyGrid(n=64)
timing = SounderTiming(tx.size, rx.size)


def path(tau_ns, aod_deg, aoa_deg, gain):
    return Mpc(tau_ns * 1e-9, 0.0, Direction(np.radians(aod_deg) % (2 * np.pi), 0.0),
               Direction(np.radians(aoa_deg) % (2 * np.pi), 0.0), np.diag([0.0, gain]), "los")


truth = [path(12.0, 10.0, 190.0, 1.0), path(21.5, -35.0, 120.0, 0.5j), path(38.0, 30.0, 300.0, 0.3)]
clean = synthesize_ctf(truth, tx, rx, timing, grid)
std = np.sqrt(clean.energy() / clean.data.size / 100)
obs = synthesize_ctf(truth, tx, rx, timing, grid, NoiseModel(std, seed=3))

print(" tau_ns  aod_deg  aoa_deg  |g_vv|  power_db")
for e in estimate_paths(obs, EstimatorConfig(max_paths=6), tx, rx, timing):
    aod = np.degrees(e.aod.azimuth)
    print(f"{e.delay * 1e9:7.3f}  {aod if aod < 180 else aod - 360:7.2f}  "
          f"{np.degrees(e.aoa.azimuth):7.2f}  {abs(e.gamma[1, 1]):6.3f}  {e.power_db:8.2f}")
