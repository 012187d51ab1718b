"""
Multipath data model and channel-transfer-function synthesis.

A CTF is the tensor ``H[f, s, m_T, m_R]``::

    H = sum_l  b_R(aoa_l, f)^T  gamma_l  b_T(aod_l, f)
               * exp(-j 2 pi f tau_l) * exp(-j 2 pi (f / f_c) nu_l t[s, m_T, m_R])  + N

``gamma_l`` is the 2 x 2 polarimetric matrix ``[[HH, HV], [VH, VV]]`` (rows
index the RX port, columns the TX port) and ``b`` the port responses of
:func:`risbeam.arrays.array_response`.  Doppler ``nu`` is quoted in Hz at the
carrier and scaled by ``f / f_c`` across the band.  The impulse response is
``numpy.fft.ifft`` of the CTF along frequency, so a path at delay ``tau``
peaks at bin ``tau * bandwidth`` on the default (periodic) grid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg.blas import zgemm

from .arrays import ArrayGeometry, SounderTiming, array_response
from .constants import BANDWIDTH_HZ, CARRIER_HZ, N_FREQ
from .geometry import Direction

SOURCES_FIXED = ("los", "ris", "scatterer", "estimated")


@dataclass
class Mpc:
    """One propagation path.

    `first_point` / `last_point` are the first and last interaction points
    (``None`` for the direct path or when unknown, e.g. estimated paths).
    """

    delay: float
    doppler: float
    aod: Direction
    aoa: Direction
    gamma: np.ndarray
    source: str = "los"
    first_point: Optional[np.ndarray] = None
    last_point: Optional[np.ndarray] = None

    def __post_init__(self):
        self.aod = Direction(*self.aod)
        self.aoa = Direction(*self.aoa)
        g = np.asarray(self.gamma, dtype=complex)
        if g.shape != (2, 2):
            raise ValueError("gamma must be a 2x2 matrix")
        if not np.all(np.isfinite(g)):
            raise ValueError("gamma must be finite")
        if not (self.delay >= 0 and np.isfinite(self.delay)):
            raise ValueError(f"delay must be finite and >= 0, got {self.delay}")
        for d in (self.aod, self.aoa):
            if not (0 <= d.azimuth < 2 * np.pi and -np.pi / 2 <= d.elevation <= np.pi / 2):
                raise ValueError(f"direction {d} outside canonical ranges")
        self.gamma = g

    @property
    def gamma_vv(self) -> complex:
        return complex(self.gamma[1, 1])

    def power(self, mode: str = "vv-only") -> float:
        if mode == "vv-only":
            return float(abs(self.gamma[1, 1]) ** 2)
        if mode == "full-pol":
            return float(np.sum(np.abs(self.gamma) ** 2))
        raise ValueError(f"unknown power mode {mode!r}")

    def scaled(self, factor) -> "Mpc":
        return replace(self, gamma=self.gamma * factor)


@dataclass
class MpcSet:
    mpcs: list = field(default_factory=list)
    position: int = 0
    scenario: str = "ris-on"
    visibility: str = "los"

    def __len__(self):
        return len(self.mpcs)

    def __iter__(self):
        return iter(self.mpcs)

    def by_source(self, source: str) -> list:
        return [m for m in self.mpcs if m.source == source]

    def total_power(self, mode: str = "vv-only") -> float:
        return float(sum(m.power(mode) for m in self.mpcs))

    def with_mpcs(self, mpcs, **kw) -> "MpcSet":
        return replace(self, mpcs=list(mpcs), **kw)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid.  Periodic grids use spacing ``B / N``."""

    center: float = CARRIER_HZ
    bandwidth: float = BANDWIDTH_HZ
    n: int = N_FREQ
    periodic: bool = True

    def __post_init__(self):
        if not (self.center > 0 and self.bandwidth > 0):
            raise ValueError("center frequency and bandwidth must be > 0")
        if self.n < 1 or (not self.periodic and self.n < 2):
            raise ValueError("too few frequency bins")

    @property
    def spacing(self) -> float:
        return self.bandwidth / self.n if self.periodic else self.bandwidth / (self.n - 1)

    @property
    def start(self) -> float:
        if self.periodic:
            return self.center - self.spacing * (self.n // 2)
        return self.center - self.bandwidth / 2

    def freqs(self) -> np.ndarray:
        return self.start + self.spacing * np.arange(self.n)

    def delay_bin(self) -> float:
        """Delay spacing of the inverse-FFT bins, seconds."""
        return 1.0 / (self.n * self.spacing)


@dataclass
class Ctf:
    """Complex tensor over (frequency, snapshot, TX element, RX element)."""

    data: np.ndarray
    grid: FrequencyGrid

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 4:
            raise ValueError("CTF tensor must be 4-D (f, s, m_T, m_R)")
        if self.data.shape[0] != self.grid.n:
            raise ValueError("frequency axis does not match the grid")

    @property
    def shape(self):
        return self.data.shape

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    def impulse_response(self) -> np.ndarray:
        return np.fft.ifft(self.data, axis=0)

    def __add__(self, other: "Ctf") -> "Ctf":
        return Ctf(self.data + other.data, self.grid)

    def __sub__(self, other: "Ctf") -> "Ctf":
        return Ctf(self.data - other.data, self.grid)

    # -- binary persistence -------------------------------------------------
    MAGIC = b"RISCTF\x00\x01"
    _HEADER = struct.Struct("<8s4q4dq")

    def to_bytes(self) -> bytes:
        g = self.grid
        head = self._HEADER.pack(self.MAGIC, *self.data.shape, g.center, g.bandwidth,
                                 g.start, g.spacing, int(g.periodic))
        return head + np.ascontiguousarray(self.data, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Ctf":
        n = cls._HEADER.size
        if len(buf) < n:
            raise ValueError("truncated CTF header")
        magic, nf, ns, nt, nr, fc, bw, _f0, _df, per = cls._HEADER.unpack(buf[:n])
        if magic != cls.MAGIC:
            raise ValueError("not a CTF file (bad magic)")
        count = nf * ns * nt * nr
        if len(buf) != n + 16 * count:
            raise ValueError("CTF payload size does not match header dimensions")
        data = np.frombuffer(buf, dtype="<c16", count=count, offset=n).reshape(nf, ns, nt, nr)
        return cls(data.astype(complex), FrequencyGrid(fc, bw, nf, bool(per)))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Ctf":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex white Gaussian noise, ``E|n|^2 = std**2``."""

    std: float = 0.0
    seed: Optional[int] = 0

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("noise std must be >= 0")

    def sample(self, shape) -> np.ndarray:
        if self.std == 0:
            return np.zeros(shape, dtype=complex)
        rng = np.random.Generator(np.random.PCG64DXSM(self.seed))
        # single-precision draws, widened and scaled in one pass
        out = np.empty(tuple(shape), dtype=complex)
        z = rng.standard_normal(2 * out.size, dtype=np.float32)
        np.multiply(z, self.std / np.sqrt(2), out=out.reshape(-1).view(float))
        return out


def _port_weighted(mpc: Mpc, tx_array, rx_array, f):
    """TX responses and gamma-weighted RX responses, shapes (2, F, M_T), (2, F, M_R)."""
    bt = array_response(tx_array, mpc.aod.unit_vector(), f)
    br = array_response(rx_array, mpc.aoa.unit_vector(), f)
    return bt, np.einsum("rt,rfn->tfn", mpc.gamma, br)


def _path_factors(mpc: Mpc, tx_array, rx_array, timing, grid, snapshots):
    """
    Split one path into a TX factor (2, F, M_T), an RX factor (2, F, M_R)
    and a per-snapshot factor (S, F) with
    ``H[f, s, m, n] = snap[s, f] * sum_t tx[t, f, m] * rx[t, f, n]``.
    """
    f = grid.freqs()
    bt, ar = _port_weighted(mpc, tx_array, rx_array, f)
    bt = bt * np.exp(-2j * np.pi * f * mpc.delay)[None, :, None]
    snap = np.ones((len(snapshots), f.size), dtype=complex)
    if mpc.doppler != 0.0:
        # switching offsets are linear in (m_T, m_R), so the Doppler factor
        # splits into a TX-side and an RX-side term per snapshot
        off = timing.offsets()
        w = -2j * np.pi * (f / grid.center) * mpc.doppler
        bt = bt * np.exp(w[:, None] * off[:, 0][None, :])[None]
        ar = ar * np.exp(w[:, None] * off[0, :][None, :])[None]
        t0 = np.asarray(snapshots, dtype=float) * timing.snapshot_time
        snap = np.exp(t0[:, None] * w[None, :])
    return bt, ar, snap


def _accumulate(h: np.ndarray, mpcs, tx_array, rx_array, timing, grid, snapshots):
    """Add the paths `mpcs` into `h` (F, S, M_T, M_R) in place."""
    if h.dtype != np.complex128 or not h.flags.c_contiguous:
        raise ValueError("accumulation buffer must be C-contiguous complex128")
    parts = [_path_factors(m, tx_array, rx_array, timing, grid, snapshots) for m in mpcs]
    if not parts:
        return
    # one rank-2L update per (bin, snapshot) with the paths and ports stacked
    # along the inner dimension; gemm on the transposed (Fortran-order) view
    # accumulates straight into h
    rx = np.concatenate([np.transpose(ar, (1, 0, 2)) for _, ar, _ in parts], axis=1)
    for i in range(len(snapshots)):
        tx = np.concatenate([np.transpose(bt * sn[i][None, :, None], (1, 2, 0))
                             for bt, _, sn in parts], axis=2)
        for k in range(h.shape[0]):
            zgemm(1.0, rx[k].T, tx[k].T, beta=1.0, c=h[k, i].T, overwrite_c=1)


def path_ctf(mpc: Mpc, tx_array: ArrayGeometry, rx_array: ArrayGeometry,
             timing: SounderTiming, grid: FrequencyGrid, snapshots: Sequence[int] = (0,)) -> np.ndarray:
    """Noise-free contribution of one path, shape (F, S, M_T, M_R)."""
    snapshots = list(snapshots)
    h = np.zeros((grid.n, len(snapshots), tx_array.size, rx_array.size), dtype=complex)
    _accumulate(h, [mpc], tx_array, rx_array, timing, grid, snapshots)
    return h


def synthesize_ctf(mpcs, tx_array: ArrayGeometry, rx_array: ArrayGeometry,
                   timing: SounderTiming, grid: FrequencyGrid,
                   noise: Optional[NoiseModel] = None, snapshots: Sequence[int] = (0,)) -> Ctf:
    """Superpose the paths of `mpcs` (an :class:`MpcSet` or iterable of Mpc) and add noise."""
    if timing.n_tx != tx_array.size or timing.n_rx != rx_array.size:
        raise ValueError(
            f"timing is for {timing.n_tx}x{timing.n_rx} channels but arrays have "
            f"{tx_array.size}x{rx_array.size} elements")
    snapshots = list(snapshots)
    shape = (grid.n, len(snapshots), tx_array.size, rx_array.size)
    if noise is not None and noise.std > 0:
        h = noise.sample(shape)
    else:
        h = np.zeros(shape, dtype=complex)
    _accumulate(h, list(mpcs), tx_array, rx_array, timing, grid, snapshots)
    return Ctf(h, grid)


__all__ = ["Ctf", "FrequencyGrid", "Mpc", "MpcSet", "NoiseModel", "path_ctf", "synthesize_ctf"]
