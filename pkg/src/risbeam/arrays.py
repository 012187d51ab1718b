"""
Analytic antenna-array responses and the switched-sounder timing model.

The measured arrays of a real sounder are described by calibration data; here
they are replaced by idealised geometries: a lambda/2 planar panel for the TX
and an octagonal cylinder of planar faces standing in for the RX.  The RX
dimensions are not taken from any hardware description and should be treated
as a plausible stand-in only.

Element response for element ``m`` towards unit direction ``u``::

    b_m(u, f) = exp(+j 2 pi f <u, p_m> / c) * max(0, <u, n_m>)**q * pol_match

with ``p_m`` the element position relative to the array reference point,
``n_m`` the element boresight and ``pol_match`` 1 for a co-polarised element
and 0 otherwise (ideal cross-polar isolation).  The frequency response of the
elements themselves is taken as flat.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import CARRIER_HZ, SPEED_OF_LIGHT, SWITCHING_TIME_S, wavelength
from .geometry import Direction, direction_vector

POLS = ("H", "V")


def _rotz(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Antenna array in its local frame plus a yaw rotation into the scene.

    Parameters
    ----------
    positions : ndarray, shape (M, 3)
        Element positions in metres, array-local frame.
    pols : sequence of {'H', 'V'}
        Polarisation tag of each element.
    normals : ndarray, shape (M, 3)
        Element boresight unit vectors, array-local frame.
    yaw : float
        Rotation of the array about +z, radians.
    q : float
        Cosine-power exponent of the element pattern (0 = isotropic).
    """

    positions: np.ndarray
    pols: tuple
    normals: np.ndarray
    yaw: float = 0.0
    q: float = 1.0
    name: str = ""

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        nrm = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must have shape (M, 3) with M >= 1")
        if nrm.shape != pos.shape:
            raise ValueError("normals must match positions")
        if not np.all(np.isfinite(pos)):
            raise ValueError("element positions must be finite")
        pols = tuple(self.pols)
        if len(pols) != pos.shape[0] or any(p not in POLS for p in pols):
            raise ValueError("one 'H'/'V' tag is required per element")
        if self.q < 0:
            raise ValueError("pattern exponent q must be >= 0")
        nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "normals", nrm)
        object.__setattr__(self, "pols", pols)

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def scene_positions(self) -> np.ndarray:
        return self.positions @ _rotz(self.yaw).T

    def scene_normals(self) -> np.ndarray:
        return self.normals @ _rotz(self.yaw).T

    def pol_mask(self) -> np.ndarray:
        """Float mask of shape (2, M): row 0 for H elements, row 1 for V."""
        tags = np.array(self.pols)
        return np.stack([(tags == p).astype(float) for p in POLS])

    def count(self, pol: str) -> int:
        return sum(1 for p in self.pols if p == pol)

    def translated(self, offset) -> "ArrayGeometry":
        return ArrayGeometry(self.positions + np.asarray(offset, dtype=float), self.pols,
                             self.normals, self.yaw, self.q, self.name)


def _dual(positions, normals, dual_pol):
    positions = np.asarray(positions, dtype=float)
    normals = np.asarray(normals, dtype=float)
    if not dual_pol:
        return positions, normals, ("V",) * len(positions)
    pos = np.repeat(positions, 2, axis=0)
    nrm = np.repeat(normals, 2, axis=0)
    return pos, nrm, ("H", "V") * len(positions)


def planar_array(rows: int = 8, cols: int = 8, spacing: float | None = None,
                 dual_pol: bool = True, yaw: float = 0.0, q: float = 1.0,
                 name: str = "planar") -> ArrayGeometry:
    """Rectangular panel in the local y-z plane facing +x, centred on the origin.

    With the default 8 x 8 dual-polarised layout this gives 128 ports.
    """
    d = wavelength() / 2 if spacing is None else spacing
    y = (np.arange(cols) - (cols - 1) / 2) * d
    z = (np.arange(rows) - (rows - 1) / 2) * d
    zz, yy = np.meshgrid(z, y, indexing="ij")
    pos = np.stack([np.zeros(zz.size), yy.ravel(), zz.ravel()], axis=1)
    nrm = np.tile([1.0, 0.0, 0.0], (pos.shape[0], 1))
    pos, nrm, pols = _dual(pos, nrm, dual_pol)
    return ArrayGeometry(pos, pols, nrm, yaw, q, name)


def octagonal_array(faces: int = 8, rows: int = 4, cols: int = 4,
                    spacing: float | None = None, dual_pol: bool = True,
                    yaw: float = 0.0, q: float = 1.0,
                    name: str = "octagonal") -> ArrayGeometry:
    """Cylinder approximated by `faces` planar rows x cols panels.

    The default 8 faces of 4 x 4 dual-polarised elements gives 256 ports.
    Each face sits at the apothem needed to fit `cols` elements of pitch
    `spacing` along its width.
    """
    d = wavelength() / 2 if spacing is None else spacing
    apothem = cols * d / (2 * np.tan(np.pi / faces))
    ys = (np.arange(cols) - (cols - 1) / 2) * d
    zs = (np.arange(rows) - (rows - 1) / 2) * d
    pos, nrm = [], []
    for k in range(faces):
        a = 2 * np.pi * k / faces
        n = np.array([np.cos(a), np.sin(a), 0.0])
        t = np.array([-np.sin(a), np.cos(a), 0.0])
        for z in zs:
            for y in ys:
                pos.append(apothem * n + y * t + np.array([0.0, 0.0, z]))
                nrm.append(n)
    pos, nrm, pols = _dual(pos, nrm, dual_pol)
    return ArrayGeometry(pos, pols, nrm, yaw, q, name)


def linear_array(n: int, spacing: float | None = None, axis=(0.0, 1.0, 0.0),
                 normal=(1.0, 0.0, 0.0), pol: str = "V", q: float = 0.0,
                 yaw: float = 0.0) -> ArrayGeometry:
    """Uniform linear array along `axis`, centred on the origin."""
    d = wavelength() / 2 if spacing is None else spacing
    offs = (np.arange(n) - (n - 1) / 2) * d
    pos = offs[:, None] * np.asarray(axis, dtype=float)[None]
    nrm = np.tile(np.asarray(normal, dtype=float), (n, 1))
    return ArrayGeometry(pos, (pol,) * n, nrm, yaw, q, "ula")


def single_element(pol: str = "V", q: float = 0.0, dual_pol: bool = False) -> ArrayGeometry:
    pos, nrm, pols = _dual(np.zeros((1, 3)), [[1.0, 0.0, 0.0]], dual_pol)
    if not dual_pol:
        pols = (pol,)
    return ArrayGeometry(pos, pols, nrm, 0.0, q, "single")


def _as_unit(d) -> np.ndarray:
    if isinstance(d, Direction):
        return d.unit_vector()
    return np.asarray(d, dtype=float)


def array_response(array: ArrayGeometry, u, freqs) -> np.ndarray:
    """
    Polarimetric responses of all elements.

    Parameters
    ----------
    array : ArrayGeometry
    u : array_like, shape (..., 3)
        Unit direction(s) in scene coordinates.
    freqs : array_like, shape (F,)
        Frequencies in Hz.

    Returns
    -------
    ndarray, shape (2, ..., F, M)
        Index 0 of the first axis is the H port response, 1 the V response.
    """
    u = np.asarray(u, dtype=float)
    f = np.atleast_1d(np.asarray(freqs, dtype=float))
    pos = array.scene_positions()
    nrm = array.scene_normals()
    proj = u @ pos.T                                   # (..., M)
    cosang = np.clip(u @ nrm.T, 0.0, None)
    gain = cosang ** array.q if array.q else np.ones_like(cosang)
    phase = 2 * np.pi / SPEED_OF_LIGHT * f[:, None] * proj[..., None, :]  # (..., F, M)
    b = np.exp(1j * phase) * gain[..., None, :]
    mask = array.pol_mask()
    shape = (2,) + (1,) * (b.ndim - 1) + (array.size,)
    return b[None] * mask.reshape(shape)


def element_response(array: ArrayGeometry, d, f: float, pol: str, m: int) -> complex:
    """Scalar response of element `m` at port `pol` towards direction `d`."""
    if not 0 <= m < array.size:
        raise IndexError(f"element index {m} out of range for {array.size} elements")
    if pol not in POLS:
        raise ValueError(f"unknown polarisation {pol!r}")
    b = array_response(array, _as_unit(d), [f])
    return complex(b[POLS.index(pol), 0, m])


def steering_vector(array: ArrayGeometry, d, f: float = CARRIER_HZ, pol: str = "V") -> np.ndarray:
    """Response of every element at one port, shape (M,)."""
    return array_response(array, _as_unit(d), [f])[POLS.index(pol), 0]


@dataclass(frozen=True)
class SounderTiming:
    """
    Switched-sounder timing.

    Channel (m_T, m_R) of snapshot `s` is sampled at
    ``s * snapshot_time + k * switching_time`` where ``k`` is the rank of the
    pair in the enumeration order.  ``order='rx-fastest'`` gives
    ``k = m_T * M_R + m_R``; ``'tx-fastest'`` gives ``k = m_R * M_T + m_T``.
    """

    n_tx: int
    n_rx: int
    switching_time: float = SWITCHING_TIME_S
    snapshot_time: float = field(default=None)
    order: str = "rx-fastest"

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("element counts must be >= 1")
        if not self.switching_time > 0:
            raise ValueError("switching_time must be > 0")
        if self.snapshot_time is None:
            object.__setattr__(self, "snapshot_time", self.switching_time * self.n_tx * self.n_rx)
        if self.snapshot_time < self.switching_time * self.n_tx * self.n_rx * (1 - 1e-12):
            raise ValueError(
                f"snapshot_time {self.snapshot_time} s is shorter than one sweep "
                f"({self.switching_time * self.n_tx * self.n_rx} s)")
        if self.order not in ("rx-fastest", "tx-fastest"):
            raise ValueError(f"unknown enumeration order {self.order!r}")

    def rank(self, m_tx, m_rx):
        if self.order == "rx-fastest":
            return np.asarray(m_tx) * self.n_rx + np.asarray(m_rx)
        return np.asarray(m_rx) * self.n_tx + np.asarray(m_tx)

    def offsets(self) -> np.ndarray:
        """Switching offsets within a snapshot, shape (M_T, M_R), seconds."""
        mt, mr = np.meshgrid(np.arange(self.n_tx), np.arange(self.n_rx), indexing="ij")
        return self.rank(mt, mr) * self.switching_time

    def sample_times(self, snapshots) -> np.ndarray:
        """Sample instants, shape (S, M_T, M_R)."""
        s = np.asarray(snapshots, dtype=float)
        return s[:, None, None] * self.snapshot_time + self.offsets()[None]


def sample_time(timing: SounderTiming, s: int, m_tx: int, m_rx: int) -> float:
    """Sampling instant of channel (m_tx, m_rx) in snapshot `s`, seconds."""
    if s < 0 or not 0 <= m_tx < timing.n_tx or not 0 <= m_rx < timing.n_rx:
        raise IndexError(f"index out of range: s={s}, m_tx={m_tx}, m_rx={m_rx}")
    return float(s * timing.snapshot_time + timing.rank(m_tx, m_rx) * timing.switching_time)


__all__ = [
    "ArrayGeometry", "SounderTiming", "POLS", "array_response", "element_response",
    "linear_array", "octagonal_array", "planar_array", "sample_time", "single_element",
    "steering_vector", "direction_vector",
]
