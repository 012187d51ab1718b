"""
Power and capacity analysis of on/off channel pairs.

Capacity follows the per-subcarrier water-filling formula: for a channel
matrix with singular values ``sigma_k`` and noise variance ``sigma_n^2``,
``C = sum_k log2(1 + P_k sigma_k^2 / sigma_n^2)`` with ``P_k`` water-filled
under ``sum_k P_k = P``.  The total power is ``P = 10**(snr_db/10) * sigma_n^2``
per frequency bin, applied to a CTF normalised to unit mean per-entry power
at each position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.linalg.blas import zherk

from .channel import Ctf, MpcSet

RANK_RTOL = 1e-12
GRAM_RTOL = 1e-13
DEFAULT_SNR_DB = tuple(range(-10, 31, 5))


class UndefinedRatioError(ZeroDivisionError, ValueError):
    """Power ratio with an empty or zero-power reference set."""


@dataclass
class PowerRatioSeries:
    positions: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray
    window: int = 5


@dataclass
class CapacityReport:
    """
    Capacity statistics.

    ``mean[state]`` and ``std[state]`` have shape (positions, snr) and hold
    the mean and standard deviation over frequency bins; ``ratio`` is
    ``mean['on'] / mean['off']``; ``region_mean[(region, state)]`` is the
    position average of the mean capacity, ``region_std`` the position
    average of the per-position std.
    """

    positions: np.ndarray
    snr_db: np.ndarray
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    ratio: Optional[np.ndarray] = None
    region_mean: dict = field(default_factory=dict)
    region_std: dict = field(default_factory=dict)

    def region_ratio(self, region: str) -> np.ndarray:
        return self.region_mean[(region, "on")] / self.region_mean[(region, "off")]


def power_ratio(on: MpcSet, off: MpcSet, mode: str = "vv-only") -> float:
    """Total path power with the surface configured over total with it off."""
    den = off.total_power(mode)
    if not den > 0:
        raise UndefinedRatioError(
            f"reference set at position {off.position} carries no {mode} power")
    return on.total_power(mode) / den


def moving_average(series, window: int = 5) -> np.ndarray:
    """Centered moving average; the edges average over the samples available."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("moving_average needs a non-empty 1-D series")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd count, got {window}")
    if window > x.size:
        raise ValueError(f"window {window} longer than the series ({x.size})")
    c = np.concatenate([[0.0], np.cumsum(x)])
    h = window // 2
    i = np.arange(x.size)
    lo = np.maximum(i - h, 0)
    hi = np.minimum(i + h + 1, x.size)
    return (c[hi] - c[lo]) / (hi - lo)


def power_ratio_series(on_sets: Sequence[MpcSet], off_sets: Sequence[MpcSet],
                       mode: str = "vv-only", window: int = 5) -> PowerRatioSeries:
    raw = np.array([power_ratio(a, b, mode) for a, b in zip(on_sets, off_sets)])
    pos = np.array([a.position for a in on_sets])
    return PowerRatioSeries(pos, raw, moving_average(raw, window), window)


def normalize_ctf(ctf: Ctf) -> Ctf:
    """Scale each snapshot to unit mean power over (f, m_T, m_R)."""
    p = np.mean(np.abs(ctf.data) ** 2, axis=(0, 2, 3), keepdims=True)
    if not np.all(p > 0):
        raise ValueError("cannot normalise an all-zero CTF")
    return Ctf(ctf.data / np.sqrt(p), ctf.grid)


def _waterfill_batch(gains: np.ndarray, power: np.ndarray, noise: float) -> np.ndarray:
    """Water-filling over the last axis.

    `gains` holds ``sigma_k^2`` (zeros mark excluded modes), `power` the
    total power per row.  With the modes sorted by ``noise / gain``, the
    level using the first k modes is ``(P + sum of the first k) / k`` and
    the active set is the longest prefix whose last mode lies below it.
    """
    g = np.asarray(gains, dtype=float)
    p = np.broadcast_to(np.asarray(power, dtype=float), g.shape[:-1])
    usable = g > 0
    inv = np.where(usable, noise / np.where(usable, g, 1.0), np.inf)
    order = np.argsort(inv, axis=-1, kind="stable")
    srt = np.take_along_axis(inv, order, axis=-1)
    fin = np.where(np.isfinite(srt), srt, 0.0)
    level = (p[..., None] + np.cumsum(fin, axis=-1)) / np.arange(1, g.shape[-1] + 1)
    n = np.sum(srt < level, axis=-1)
    top = int(n.max(initial=0))
    out = np.zeros_like(g)
    if top == 0:
        return out
    # P_k = (P + sum_j (inv_j - inv_k)) / n over the active prefix; pairwise
    # differences avoid cancelling the level against a large inv_k
    act = np.arange(top) < n[..., None]
    head = np.where(act, fin[..., :top], 0.0)
    diff = np.where(act[..., None, :], head[..., None, :] - head[..., :, None], 0.0)
    alloc = (p[..., None] + diff.sum(axis=-1)) / np.maximum(n, 1)[..., None]
    vals = np.zeros_like(g)
    vals[..., :top] = np.where(act, np.clip(alloc, 0.0, None), 0.0)
    np.put_along_axis(out, order, vals, axis=-1)
    return out


def waterfill(sv, total_power: float, noise: float = 1.0) -> np.ndarray:
    """
    Water-filling power allocation over eigenmodes.

    Parameters
    ----------
    sv : array_like
        Singular values, descending, > 0.
    total_power : float
        Power budget ``P > 0``.
    noise : float
        Noise variance.

    Returns
    -------
    ndarray
        Allocations ``P_k = max(0, mu - noise / sv_k**2)`` summing to ``P``.
    """
    s = np.asarray(sv, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("waterfill needs a non-empty 1-D array of singular values")
    if np.any(s <= 0) or np.any(np.diff(s) > 0):
        raise ValueError("singular values must be positive and sorted descending")
    if not total_power > 0 or not noise > 0:
        raise ValueError("total power and noise variance must be > 0")
    return _waterfill_batch(s ** 2, np.asarray(total_power), noise)


def water_level(sv, allocation, noise: float = 1.0) -> np.ndarray:
    """``P_k + noise / sv_k**2``; equal across active modes at the optimum."""
    s = np.asarray(sv, dtype=float)
    return np.asarray(allocation) + noise / s ** 2


def mimo_capacity(sv, snr_db: float, noise: float = 1.0) -> float:
    """Water-filled capacity (bit/s/Hz) for one set of singular values."""
    s = np.asarray(sv, dtype=float)
    s = s[s > RANK_RTOL * s.max()] if s.size and s.max() > 0 else s[:0]
    if s.size == 0:
        return 0.0
    p = 10 ** (snr_db / 10) * noise
    alloc = waterfill(np.sort(s)[::-1], p, noise)
    return float(np.sum(np.log2(1 + alloc * np.sort(s)[::-1] ** 2 / noise)))


def _mode_gains(h: np.ndarray) -> np.ndarray:
    """
    Squared singular values of each matrix in `h` (..., M, N), descending.

    Computed as eigenvalues of the smaller Gram matrix, whose absolute
    accuracy is about machine epsilon times the top gain; gains below
    ``GRAM_RTOL`` of the top one are set to zero.
    """
    m, n = h.shape[-2:]
    flat = h.reshape(-1, m, n)
    k = min(m, n)
    g = np.empty((flat.shape[0], k))
    for i, a in enumerate(flat):
        # lower triangle of a^H a (or a a^H when M < N)
        gram = zherk(1.0, a, trans=2 if m >= n else 0, lower=1)
        g[i] = eigh(gram, lower=True, eigvals_only=True, driver="evd",
                    overwrite_a=True, check_finite=False)[::-1]
    g = g.reshape(h.shape[:-2] + (k,))
    top = g[..., :1]
    return np.where(g > GRAM_RTOL * top, g, 0.0)


def capacity(ctf: Ctf, snr_db, position: int = 0, noise: float = 1.0,
             normalize: bool = False) -> np.ndarray:
    """
    Per-frequency capacity of one snapshot of `ctf`.

    Mode gains ``sigma_k^2`` come from the Gram-matrix eigenvalues of each
    bin's ``m_R x m_T`` matrix; gains below ``1e-13`` of the largest are
    treated as zero (such modes never reach the water level at the SNRs of
    interest).  With `normalize`, the snapshot is first scaled to unit mean
    per-entry power, as :func:`normalize_ctf` does.  Returns shape (F,) for
    a scalar `snr_db`, else (len(snr_db), F).
    """
    if not 0 <= position < ctf.shape[1]:
        raise ValueError(f"snapshot {position} outside the CTF ({ctf.shape[1]} snapshots)")
    x = ctf.data[:, position]                           # (F, M_T, M_R)
    g = _mode_gains(x)
    if normalize:
        p = float(np.vdot(x, x).real) / x.size
        if not p > 0:
            raise ValueError("cannot normalise an all-zero CTF")
        g = g / p
    snrs = np.atleast_1d(np.asarray(snr_db, dtype=float))
    out = np.empty((snrs.size, x.shape[0]))
    for i, snr in enumerate(snrs):
        p = np.full(x.shape[0], 10 ** (snr / 10) * noise)
        alloc = _waterfill_batch(g, p, noise)
        out[i] = np.sum(np.log2(1 + alloc * g / noise), axis=-1)
    return out[0] if np.ndim(snr_db) == 0 else out


def capacity_stats(ctf: Ctf, snr_db, position: int = 0,
                   normalize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Mean and std across frequency, one value per SNR."""
    c = capacity(ctf, np.atleast_1d(snr_db), position, normalize=normalize)
    return c.mean(axis=-1), c.std(axis=-1)


def region_report(positions, snr_db, mean: Mapping[str, np.ndarray], std: Mapping[str, np.ndarray],
                  regions: Mapping[str, Sequence[int]]) -> CapacityReport:
    """
    Assemble per-position and per-region capacity statistics.

    `mean` and `std` map a state (``'on'``/``'off'``) to arrays of shape
    (positions, snr).  `regions` maps a region name to the positions it
    contains.
    """
    positions = np.asarray(positions)
    rep = CapacityReport(positions, np.asarray(snr_db, dtype=float),
                         {k: np.asarray(v, float) for k, v in mean.items()},
                         {k: np.asarray(v, float) for k, v in std.items()})
    if "on" in rep.mean and "off" in rep.mean:
        rep.ratio = rep.mean["on"] / rep.mean["off"]
    index = {int(p): i for i, p in enumerate(positions)}
    for name, members in regions.items():
        rows = [index[int(p)] for p in members if int(p) in index]
        if not rows:
            continue
        for state in rep.mean:
            rep.region_mean[(name, state)] = rep.mean[state][rows].mean(axis=0)
            rep.region_std[(name, state)] = rep.std[state][rows].mean(axis=0)
    return rep


__all__ = ["CapacityReport", "DEFAULT_SNR_DB", "PowerRatioSeries", "UndefinedRatioError",
           "capacity", "capacity_stats", "mimo_capacity", "moving_average", "normalize_ctf",
           "power_ratio", "power_ratio_series", "region_report", "water_level", "waterfill"]
