"""
1-bit reconfigurable surface: panel geometry, camera-driven position
estimates, geometric MRT phase maps, quantisation and the scattered path.

The scattered field of the panel is a scalar physical-optics sum over the
elements::

    g = K * sum_n a_n g(in_n) g(out_n) exp(j s_n) exp(-j k (d1_n + d2_n)) / (d1_n d2_n)

with ``K = pitch**2 / lambda`` so that a panel in the specular configuration
approaches the mirror-image amplitude ``1 / (d1 + d2)`` of a large plate,
``g`` the cosine-power element pattern and ``s_n`` the configured phase.
An element phase of ``+theta_n`` (the MRT map) cancels the propagation phase
``-theta_n`` and co-phases every element at the receiver.

How the commercial surface computes its MRT configuration internally is not
public; the phase-conjugation form used here is the standard geometric
reading.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .constants import CARRIER_HZ, SPEED_OF_LIGHT, wavelength
from .geometry import (GeometryError, RectSurface, direction_between, direction_of,
                       direction_vector, plane_axes, vec3)

STATES = (0.0, np.pi)


@dataclass(frozen=True)
class RisPanel:
    """
    Rectangular grid of 1-bit reflecting elements.

    Parameters
    ----------
    center, normal : array_like
        Panel centre and unit boresight (the illuminated side).
    rows, cols : int
        Element grid, rows along the panel height axis.
    pitch : float
        Element spacing in metres; lambda/2 at the carrier by default.
    orientation : float
        In-plane rotation about the normal, radians.
    amplitude : float or ndarray
        Per-element reflection amplitude in (0, 1].
    q : float
        Element pattern cosine exponent.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    rows: int = 16
    cols: int = 16
    pitch: Optional[float] = None
    orientation: float = 0.0
    amplitude: Union[float, np.ndarray] = 1.0
    q: float = 1.0
    states: tuple = STATES

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1) > 1e-9:
            raise GeometryError("panel normal must be unit length")
        object.__setattr__(self, "normal", vec3(n))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("panel needs at least one row and one column")
        if self.pitch is None:
            object.__setattr__(self, "pitch", wavelength(CARRIER_HZ) / 2)
        if not self.pitch > 0:
            raise ValueError("pitch must be > 0")
        a = np.broadcast_to(np.asarray(self.amplitude, dtype=float), (self.rows, self.cols))
        if np.any(a <= 0) or np.any(a > 1):
            raise ValueError("element amplitudes must lie in (0, 1]")
        if len(self.states) != 2:
            raise ValueError("a 1-bit panel has exactly two phase states")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def amplitudes(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.amplitude, dtype=float), self.shape)

    @property
    def width(self) -> float:
        return self.cols * self.pitch

    @property
    def height(self) -> float:
        return self.rows * self.pitch

    def element_positions(self) -> np.ndarray:
        """Element centres, shape (rows, cols, 3)."""
        w, h = plane_axes(self.normal, self.orientation)
        cu = (np.arange(self.cols) - (self.cols - 1) / 2) * self.pitch
        rv = (np.arange(self.rows) - (self.rows - 1) / 2) * self.pitch
        return (self.center[None, None]
                + rv[:, None, None] * h[None, None]
                + cu[None, :, None] * w[None, None])

    def rect(self) -> RectSurface:
        return RectSurface(self.center, self.normal, self.width, self.height,
                           self.orientation, "ris", "ris")

    def illuminated(self, point) -> bool:
        return float((np.asarray(point, dtype=float) - self.center) @ self.normal) > 0


@dataclass(frozen=True)
class RisConfig:
    """Bit matrix selecting one of the two panel states per element."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or not np.all((b == 0) | (b == 1)):
            raise ValueError("configuration must be a 2-D matrix of 0/1 bits")
        object.__setattr__(self, "bits", b.astype(np.uint8))

    @classmethod
    def zeros(cls, panel: RisPanel) -> "RisConfig":
        return cls(np.zeros(panel.shape, dtype=np.uint8))

    def phases(self, panel: RisPanel) -> np.ndarray:
        if self.bits.shape != panel.shape:
            raise ValueError(f"config shape {self.bits.shape} does not match panel {panel.shape}")
        return np.where(self.bits == 1, panel.states[1], panel.states[0])

    def to_text(self) -> str:
        """One line of '0'/'1' characters per row, newline terminated."""
        return "".join("".join(str(int(v)) for v in row) + "\n" for row in self.bits)

    @classmethod
    def from_text(cls, text: str) -> "RisConfig":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines or any(len(ln) != len(lines[0]) for ln in lines):
            raise ValueError("bit matrix rows must be non-empty and of equal length")
        if any(set(ln) - {"0", "1"} for ln in lines):
            raise ValueError("bit matrix may only contain '0' and '1'")
        return cls(np.array([[int(c) for c in ln] for ln in lines], dtype=np.uint8))

    def __eq__(self, other):
        return isinstance(other, RisConfig) and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class VisionSensor:
    """
    Camera model: bearing from the panel centre is accurate up to Gaussian
    noise, range is either the true one or a fixed approximate value.
    """

    angular_std: float = 0.0
    range_mode: str = "true"  # or "fixed"
    fixed_range: float = 1.0
    range_std: float = 0.0

    def __post_init__(self):
        if self.angular_std < 0 or self.range_std < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if self.range_mode not in ("true", "fixed"):
            raise ValueError(f"unknown range mode {self.range_mode!r}")
        if self.range_mode == "fixed" and not self.fixed_range > 0:
            raise ValueError("fixed_range must be > 0")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def vision_estimate(sensor: VisionSensor, true_pos, panel: RisPanel, rng_seed=None) -> np.ndarray:
    """Position of a node as reconstructed from the panel-mounted camera."""
    rng = _rng(rng_seed)
    rel = np.asarray(true_pos, dtype=float) - panel.center
    d = direction_of(rel)
    az = d.azimuth + sensor.angular_std * rng.standard_normal()
    el = d.elevation + sensor.angular_std * rng.standard_normal()
    r = np.linalg.norm(rel) if sensor.range_mode == "true" else sensor.fixed_range
    r = max(r + sensor.range_std * rng.standard_normal(), 1e-3)
    return panel.center + r * direction_vector(az, el)


def _check_side(panel: RisPanel, *points):
    for p in points:
        if not panel.illuminated(p):
            raise GeometryError("point lies behind the panel or on its plane")


def _path_lengths(panel: RisPanel, tx, rx):
    p = panel.element_positions()
    d1 = np.linalg.norm(p - np.asarray(tx, dtype=float), axis=-1)
    d2 = np.linalg.norm(p - np.asarray(rx, dtype=float), axis=-1)
    return p, d1, d2


def ideal_phase_map(panel: RisPanel, tx, rx, f: float = CARRIER_HZ) -> np.ndarray:
    """Per-element geometric path phase, ``mod(2 pi f (d1 + d2) / c, 2 pi)``."""
    _check_side(panel, tx, rx)
    _, d1, d2 = _path_lengths(panel, tx, rx)
    return np.mod(2 * np.pi * f / SPEED_OF_LIGHT * (d1 + d2), 2 * np.pi)


def _wrap(x):
    return np.angle(np.exp(1j * x))


def quantize_1bit(ideal, states=STATES) -> RisConfig:
    """
    Pick, per element, the state closest to the ideal phase.

    For a pair of states pi apart, nearest-to-``theta`` and
    nearest-to-``-theta`` coincide, so this is also the state minimising
    ``|wrap(-theta - s)|``.  Ties go to the first state.
    """
    ideal = np.asarray(ideal, dtype=float)
    r0 = np.abs(_wrap(ideal - states[0]))
    r1 = np.abs(_wrap(ideal - states[1]))
    return RisConfig((r1 < r0 - 1e-12).astype(np.uint8))


def mrt_config(panel: RisPanel, tx, rx, f: float = CARRIER_HZ) -> RisConfig:
    return quantize_1bit(ideal_phase_map(panel, tx, rx, f), panel.states)


def _element_patterns(panel: RisPanel, p, tx, rx, d1, d2):
    cin = ((np.asarray(tx) - p) @ panel.normal) / d1
    cout = ((np.asarray(rx) - p) @ panel.normal) / d2
    cin, cout = np.clip(cin, 0, None), np.clip(cout, 0, None)
    if panel.q == 0:
        return np.ones_like(cin), np.ones_like(cout)
    return cin ** panel.q, cout ** panel.q


def gain_constant(panel: RisPanel, f: float = CARRIER_HZ) -> float:
    return panel.pitch ** 2 / wavelength(f)


def ris_path_gain(panel: RisPanel, config, tx, rx, f: float = CARRIER_HZ) -> complex:
    """
    Complex gain of the TX -> panel -> RX path.

    `config` is a :class:`RisConfig` or a (rows, cols) matrix of element
    phases in radians (continuous configurations).
    """
    _check_side(panel, tx, rx)
    phases = config.phases(panel) if isinstance(config, RisConfig) else np.asarray(config, dtype=float)
    if phases.shape != panel.shape:
        raise ValueError(f"config shape {phases.shape} does not match panel {panel.shape}")
    p, d1, d2 = _path_lengths(panel, tx, rx)
    gin, gout = _element_patterns(panel, p, tx, rx, d1, d2)
    k = 2 * np.pi * f / SPEED_OF_LIGHT
    terms = panel.amplitudes * gin * gout * np.exp(1j * (phases - k * (d1 + d2))) / (d1 * d2)
    return complex(gain_constant(panel, f) * terms.sum())


def coherent_gain(panel: RisPanel, tx, rx, f: float = CARRIER_HZ) -> float:
    """Upper bound ``K * sum a g g / (d1 d2)`` reached by perfect co-phasing."""
    _check_side(panel, tx, rx)
    p, d1, d2 = _path_lengths(panel, tx, rx)
    gin, gout = _element_patterns(panel, p, tx, rx, d1, d2)
    return float(gain_constant(panel, f) * np.sum(panel.amplitudes * gin * gout / (d1 * d2)))


def ris_to_mpc(panel: RisPanel, config, tx, rx, f_center: float = CARRIER_HZ,
               rx_velocity=None, hh_config=None):
    """
    Package the panel path as one multipath component.

    The VV entry carries the configured gain.  The panel only acts on the
    vertical polarisation; the HH entry sees it as a metal plate (all-zero
    configuration) unless `hh_config` says otherwise.
    """
    from .channel import Mpc

    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    c = panel.center
    length = np.linalg.norm(tx - c) + np.linalg.norm(c - rx)
    tau = length / SPEED_OF_LIGHT
    rot = np.exp(2j * np.pi * f_center * tau)
    g_vv = ris_path_gain(panel, config, tx, rx, f_center) * rot
    g_hh = ris_path_gain(panel, RisConfig.zeros(panel) if hh_config is None else hh_config,
                         tx, rx, f_center) * rot
    aoa = direction_between(rx, c)
    nu = 0.0
    if rx_velocity is not None:
        nu = float(np.asarray(rx_velocity) @ aoa.unit_vector()) / wavelength(f_center)
    return Mpc(delay=tau, doppler=nu, aod=direction_between(tx, c), aoa=aoa,
               gamma=np.array([[g_hh, 0.0], [0.0, g_vv]], dtype=complex),
               source="ris", first_point=c.copy(), last_point=c.copy())


__all__ = [
    "RisConfig", "RisPanel", "STATES", "VisionSensor", "coherent_gain", "ideal_phase_map",
    "mrt_config", "quantize_1bit", "ris_path_gain", "ris_to_mpc", "vision_estimate",
]
