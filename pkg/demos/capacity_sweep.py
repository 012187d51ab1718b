"""Water-filled capacity of a random 8 x 8 channel over the SNR sweep."""

import numpy as np

from risbeam.analysis import DEFAULT_SNR_DB, mimo_capacity, waterfill

rng = np.random.default_rng(1)
h = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))) / np.sqrt(2)
sv = np.linalg.svd(h, compute_uv=False)

print("snr_db  capacity  active_modes")
for snr in DEFAULT_SNR_DB:
    p = waterfill(sv, 10 ** (snr / 10))
    print(f"{snr:6d}  {mimo_capacity(sv, snr):8.3f}  {np.count_nonzero(p):12d}")
