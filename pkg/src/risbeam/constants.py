"""Physical constants and sounder defaults."""

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

CARRIER_HZ = 28e9
BANDWIDTH_HZ = 768e6
DELAY_RESOLUTION_S = 1.0 / BANDWIDTH_HZ  # 1.3021 ns, 39.04 cm
SWITCHING_TIME_S = 18.8e-6
SNAPSHOT_TIME_S = 0.6
# one full 128 x 256 switching sweep, the "~600 ms" of the sounder
FULL_SWEEP_TIME_S = SWITCHING_TIME_S * 128 * 256
TRAJECTORY_LENGTH_M = 1.0
N_SNAPSHOTS = 128
RX_SPEED_MPS = 0.01

N_FREQ = 256

RIS_ROWS = 16
RIS_COLS = 16


def wavelength(f: float = CARRIER_HZ) -> float:
    return SPEED_OF_LIGHT / f


def db2lin(x):
    return 10.0 ** (x / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)
