"""
Scene-to-multipath expansion with the image method.

Paths emitted per RX position:

* the direct path, if no surface obstructs it;
* one first-order specular path per reflecting rectangle whose reflection
  point falls inside it, with free-space amplitude ``kappa / length`` times
  the material reflection amplitude;
* the RIS path (quantised MRT when on, all-zero bits, i.e. a metal plate,
  when off), kept only while it is within `ris_visibility_db` of the fully
  coherent panel gain;
* one point-scatterer path per ``scatterer`` rectangle, bistatic amplitude
  ``sqrt(sigma / 4 pi) / (d1 d2)`` with ``sigma = area * loss``.

Doppler is the projection of the RX velocity on the arrival direction over
the carrier wavelength.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .channel import Mpc, MpcSet
from .constants import CARRIER_HZ, SPEED_OF_LIGHT, db2lin, wavelength
from .geometry import (RectSurface, SceneLayout, direction_between, ray_hits_rect,
                       segment_hits_rect, specular_image, unit)
from .ris import RisConfig, VisionSensor, coherent_gain, mrt_config, ris_to_mpc, vision_estimate

MATERIAL_LOSS_DB = {"metal": 0.0, "wood": 6.0, "glass": 3.0, "scatterer": 0.0, "ris": 0.0}


def _loss_db(rect: RectSurface, table) -> float:
    if rect.loss_db is not None:
        return rect.loss_db
    return table.get(rect.material, 0.0)


def _obstructors(layout: SceneLayout, panel_rect) -> list:
    obs = [s for s in layout.surfaces if s.material != "scatterer"]
    if panel_rect is not None:
        obs.append(panel_rect)
    return obs


def _clear(a, b, obstructors, skip=()) -> bool:
    return not any(segment_hits_rect(a, b, s) for s in obstructors
                   if all(s is not k for k in skip))


def _doppler(velocity, rx, toward, carrier) -> float:
    if velocity is None or not np.any(velocity):
        return 0.0
    return float(np.asarray(velocity) @ unit(np.asarray(toward) - rx)) / wavelength(carrier)


def ris_configuration(layout: SceneLayout, position_index: int, ris_state: str, *,
                      carrier: float = CARRIER_HZ, sensor: Optional[VisionSensor] = None,
                      seed: int = 0, update_every: int = 1) -> RisConfig:
    """Configuration the panel holds while the RX is at `position_index`.

    When on, the bits are recomputed every `update_every` positions from a
    camera estimate of the RX taken at the last update instant.
    """
    panel = layout.ris_panel
    if ris_state in ("off", "ris-off"):
        return RisConfig.zeros(panel)
    if ris_state not in ("on", "ris-on"):
        raise ValueError(f"unknown RIS state {ris_state!r}")
    sensor = sensor or VisionSensor()
    upd = position_index - position_index % max(int(update_every), 1)
    rx_true = layout.rx_positions()[upd]
    rx_est = vision_estimate(sensor, rx_true, panel, np.random.default_rng([seed, upd]))
    if not panel.illuminated(rx_est):
        rx_est = rx_true
    return mrt_config(panel, layout.tx, rx_est, carrier)


def scene_to_mpcs(layout: SceneLayout, position_index: int, ris_state: str = "on", *,
                  carrier: float = CARRIER_HZ, sensor: Optional[VisionSensor] = None,
                  seed: int = 0, update_every: int = 1, material_loss: Optional[dict] = None,
                  ris_visibility_db: float = 10.0, kappa: float = 1.0,
                  include_scatterers: bool = True, config: Optional[RisConfig] = None) -> MpcSet:
    """Ground-truth multipath components at one RX position."""
    table = dict(MATERIAL_LOSS_DB, **(material_loss or {}))
    positions = layout.rx_positions()
    if not 0 <= position_index < len(positions):
        raise IndexError(f"position {position_index} outside trajectory")
    rx = positions[position_index]
    tx = layout.tx
    vel = layout.trajectory.velocity(position_index)
    panel = layout.ris_panel
    prect = panel.rect() if panel is not None else None
    obs = _obstructors(layout, prect)
    out = []

    if _clear(tx, rx, obs):
        d = float(np.linalg.norm(rx - tx))
        a = kappa / d
        out.append(Mpc(d / SPEED_OF_LIGHT, _doppler(vel, rx, tx, carrier),
                       direction_between(tx, rx), direction_between(rx, tx),
                       np.diag([a, a]).astype(complex), "los"))

    for s in layout.surfaces:
        if s.material in ("absorber", "scatterer", "ris"):
            continue
        dt, dr = s.signed_distance(tx), s.signed_distance(rx)
        if dt * dr <= 0:
            continue
        img = specular_image(tx, s)
        length = float(np.linalg.norm(rx - img))
        hit = ray_hits_rect(rx, (img - rx) / length, s)
        if hit is None or np.linalg.norm(hit - rx) >= length:
            continue
        if not (_clear(tx, hit, obs, (s,)) and _clear(hit, rx, obs, (s,))):
            continue
        a = kappa * np.sqrt(db2lin(-_loss_db(s, table))) / length
        out.append(Mpc(length / SPEED_OF_LIGHT, _doppler(vel, rx, hit, carrier),
                       direction_between(tx, hit), direction_between(rx, hit),
                       np.diag([a, a]).astype(complex), s.name or s.material,
                       first_point=hit, last_point=hit))

    if panel is not None and panel.illuminated(tx) and panel.illuminated(rx):
        c = panel.center
        if _clear(tx, c, obs, (prect,)) and _clear(c, rx, obs, (prect,)):
            cfg = config if config is not None else ris_configuration(
                layout, position_index, ris_state, carrier=carrier, sensor=sensor,
                seed=seed, update_every=update_every)
            m = ris_to_mpc(panel, cfg, tx, rx, carrier, rx_velocity=vel)
            m.gamma *= kappa
            ref = kappa * coherent_gain(panel, tx, rx, carrier)
            if abs(m.gamma_vv) ** 2 >= ref ** 2 * db2lin(-ris_visibility_db):
                out.append(m)

    if include_scatterers:
        for s in layout.surfaces:
            if s.material != "scatterer":
                continue
            p = s.center
            d1, d2 = np.linalg.norm(p - tx), np.linalg.norm(rx - p)
            if min(d1, d2) < 1e-9 or not (_clear(tx, p, obs) and _clear(p, rx, obs)):
                continue
            sigma = s.width * s.height * db2lin(-_loss_db(s, table))
            a = kappa * np.sqrt(sigma / (4 * np.pi)) / (d1 * d2)
            out.append(Mpc((d1 + d2) / SPEED_OF_LIGHT, _doppler(vel, rx, p, carrier),
                           direction_between(tx, p), direction_between(rx, p),
                           np.diag([a, a]).astype(complex), "scatterer",
                           first_point=p.copy(), last_point=p.copy()))

    state = "ris-off" if ris_state in ("off", "ris-off") else "ris-on"
    vis = "los" if any(m.source == "los" for m in out) else "nlos"
    return MpcSet(out, position_index, state, vis)
