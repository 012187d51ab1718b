"""
Virtual perfect-absorber blocker.

Paths are removed when their departure leg (TX to first interaction point)
or arrival leg (last interaction point to RX) crosses the blocker.  When the
interaction points are unknown, as for estimated paths, the legs are the
rays along the departure/arrival directions truncated at the total path
length ``c * tau``.  The transition this produces is sharp; a real body
would shadow over a Fresnel-zone-wide region instead.
"""

from __future__ import annotations

import numpy as np

from .channel import Ctf, MpcSet, synthesize_ctf, NoiseModel
from .constants import SPEED_OF_LIGHT
from .geometry import GeometryError, RectSurface, direction_vector, ray_hits_rect, segment_hits_rect


def _leg_blocked(origin, point, direction, max_len, blocker) -> bool:
    if point is not None:
        return segment_hits_rect(origin, point, blocker)
    hit = ray_hits_rect(origin, direction, blocker)
    return hit is not None and np.linalg.norm(hit - origin) < max_len


def is_blocked(mpc, blocker: RectSurface, tx, rx) -> bool:
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    length = mpc.delay * SPEED_OF_LIGHT
    if mpc.source == "los":
        return segment_hits_rect(tx, rx, blocker)
    return (_leg_blocked(tx, mpc.first_point, mpc.aod.unit_vector(), length, blocker)
            or _leg_blocked(rx, mpc.last_point, mpc.aoa.unit_vector(), length, blocker))


def apply_blocker(mpcs: MpcSet, blocker: RectSurface, tx, rx) -> MpcSet:
    """Drop every path whose departure or arrival leg hits `blocker`."""
    if blocker.material != "absorber":
        raise ValueError("the virtual blocker must be an absorber")
    kept = [m for m in mpcs if not is_blocked(m, blocker, tx, rx)]
    vis = "los" if any(m.source == "los" for m in kept) else "nlos"
    return mpcs.with_mpcs(kept, visibility=vis)


def reconstruct_nlos_ctf(filtered: MpcSet, tx_array, rx_array, timing, grid,
                         noise: NoiseModel, snapshots=(0,)) -> Ctf:
    """Rebuild the CTF from a reduced path set, with freshly drawn noise."""
    return synthesize_ctf(filtered, tx_array, rx_array, timing, grid, noise, snapshots)


def calibrated_blocker(tx, rx_positions, nlos_from: int, distance: float = 0.5,
                       height: float = 1.0, margin_deg: float = 3.0) -> RectSurface:
    """
    Vertical absorber in front of the TX shadowing the direct path exactly
    from `nlos_from` onwards.

    The azimuth of the direct path must change monotonically along the
    trajectory; the blocker edge is placed halfway between the directions to
    positions ``nlos_from - 1`` and ``nlos_from`` and the panel extends
    `margin_deg` past the direction to the last position.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx_positions, dtype=float)
    if not 0 < nlos_from < len(rx):
        raise GeometryError(f"nlos_from={nlos_from} must fall inside the trajectory")
    v = rx - tx
    az = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    steps = np.diff(az)
    sign = np.sign(az[-1] - az[0])
    if sign == 0 or np.any(steps * sign < -1e-12):
        raise GeometryError("direct-path azimuth is not monotonic along the trajectory")
    if abs(az[nlos_from] - az[nlos_from - 1]) < 1e-9:
        raise GeometryError("positions either side of the boundary coincide")
    edge = 0.5 * (az[nlos_from - 1] + az[nlos_from])
    far = az[-1] + sign * np.radians(margin_deg)
    mid = 0.5 * (edge + far)
    half = 0.5 * abs(far - edge)
    u = direction_vector(mid)
    center = tx + distance * u
    center[2] = tx[2]
    return RectSurface(center, -u, 2 * distance * np.tan(half), height,
                       material="absorber", name="blocker")
