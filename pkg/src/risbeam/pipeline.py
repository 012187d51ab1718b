"""
End-to-end run over a scenario.

For every position and surface state: expand the scene into paths,
synthesise the noisy CTF, either estimate the paths from it or take the
ground truth, apply the virtual blocker from `nlos_from` on (rebuilding
the CTF from the surviving paths), then compute power ratios and
capacities.  Results go to five CSV files whose byte layout is fixed in
``docs/output-formats.md``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .analysis import (CapacityReport, PowerRatioSeries, capacity_stats, moving_average,
                       power_ratio, region_report)
from .blocker import apply_blocker, reconstruct_nlos_ctf
from .channel import MpcSet, synthesize_ctf
from .constants import lin2db
from .sage import estimate_paths, estimates_to_mpcs
from .scenario import Scenario
from .scene import scene_to_mpcs

STATES = ("on", "off")
FILES = ("estimates.csv", "power_ratio.csv", "capacity.csv", "region_capacity.csv",
         "manifest.csv")


class PipelineError(RuntimeError):
    """A module failed while processing one position/state."""


@dataclass
class RunFlags:
    ris: str = "both"
    estimate: bool = False
    nlos_from: Optional[int] = None
    positions: Optional[Sequence[int]] = None
    snr_db: Optional[Sequence[float]] = None
    out: Optional[Path] = None
    seed: Optional[int] = None

    def states(self) -> tuple:
        if self.ris == "both":
            return STATES
        if self.ris in STATES:
            return (self.ris,)
        raise ValueError(f"--ris must be on, off or both, got {self.ris!r}")


@dataclass
class PipelineResult:
    positions: list
    nlos_from: int
    states: tuple
    truth: dict = field(default_factory=dict)       # state -> [MpcSet] before the blocker
    paths: dict = field(default_factory=dict)       # state -> [MpcSet] fed to analysis
    estimates: dict = field(default_factory=dict)   # state -> [list of PathEstimate]
    power: Optional[PowerRatioSeries] = None
    capacity: Optional[CapacityReport] = None
    files: dict = field(default_factory=dict)

    def regions(self) -> dict:
        return {"los": [p for p in self.positions if p < self.nlos_from],
                "nlos": [p for p in self.positions if p >= self.nlos_from]}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.9g}"
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _window(window: int, n: int) -> int:
    w = min(window, n)
    return w if w % 2 else w - 1


ESTIMATE_COLUMNS = ("position", "scenario", "path_id", "tau_ns", "nu_hz", "aod_az_deg",
                    "aod_el_deg", "aoa_az_deg", "aoa_el_deg", "gamma_vv_db",
                    "gamma_vv_phase_deg", "residual_db", "converged")


def _path_row(pos, state, i, m, residual_db, converged):
    g = m.gamma[1, 1]
    return (pos, f"ris-{state}", i, m.delay * 1e9, m.doppler,
            *np.degrees([m.aod.azimuth, m.aod.elevation, m.aoa.azimuth, m.aoa.elevation]),
            lin2db(abs(g) ** 2) if g != 0 else -np.inf,
            np.degrees(np.angle(g)), residual_db, converged)


def run_pipeline(sc: Scenario, flags: Optional[RunFlags] = None) -> PipelineResult:
    """Run the scenario; write the CSV outputs when ``flags.out`` is set."""
    flags = flags or RunFlags()
    states = flags.states()
    seed = sc.run.seed if flags.seed is None else int(flags.seed)
    layout = sc.layout()
    n_pos = sc.scene.n_positions
    nlos_from = sc.scene.nlos_from if flags.nlos_from is None else int(flags.nlos_from)
    positions = list(range(n_pos)) if flags.positions is None else [int(p) for p in flags.positions]
    for p in positions:
        if not 0 <= p < n_pos:
            raise PipelineError(f"position {p} outside 0..{n_pos - 1}")
    snrs = np.asarray(sc.analysis.snr_db if flags.snr_db is None else flags.snr_db, float)
    blk = sc.blocker(layout, nlos_from)
    tx_arr, rx_arr = sc.arrays()
    timing, grid = sc.timing(), sc.grid()
    sensor = sc.sensor()
    cfg = sc.estimator_config()
    rx_all = layout.rx_positions()

    res = PipelineResult(positions, nlos_from, states)
    cap_mean = {s: [] for s in states}
    cap_std = {s: [] for s in states}
    est_rows = []
    for st in states:
        si = STATES.index(st)
        res.truth[st], res.paths[st], res.estimates[st] = [], [], []
        for p in positions:
            try:
                truth = scene_to_mpcs(layout, p, st, carrier=sc.physics.carrier_hz,
                                      sensor=sensor, seed=seed,
                                      update_every=sc.ris.update_every,
                                      ris_visibility_db=sc.ris.visibility_db,
                                      kappa=sc.physics.kappa)
                obs = synthesize_ctf(truth, tx_arr, rx_arr, timing, grid,
                                     sc.noise([seed, p, si, 0]))
                if flags.estimate:
                    ests = estimate_paths(obs, cfg, tx_arr, rx_arr, timing)
                    found = estimates_to_mpcs(ests, p, truth.scenario)
                    res.estimates[st].append(ests)
                    for i, e in enumerate(x for x in ests if x.above_threshold):
                        est_rows.append(_path_row(p, st, i, e.to_mpc(), e.power_db, e.converged))
                else:
                    found = truth
                    tot = truth.total_power("full-pol")
                    for i, m in enumerate(truth):
                        est_rows.append(_path_row(p, st, i, m, lin2db(m.power("full-pol") / tot),
                                                  True))
                if p >= nlos_from:
                    kept = apply_blocker(found, blk, layout.tx, rx_all[p])
                    ctf = reconstruct_nlos_ctf(kept, tx_arr, rx_arr, timing, grid,
                                               sc.noise([seed, p, si, 1]))
                else:
                    kept, ctf = found, obs
                mean, std = capacity_stats(ctf, snrs, normalize=True)
            except Exception as exc:
                raise PipelineError(f"position {p}, ris-{st}: {type(exc).__name__}: {exc}") from exc
            res.truth[st].append(truth)
            res.paths[st].append(kept)
            cap_mean[st].append(mean)
            cap_std[st].append(std)

    mode = sc.analysis.power_mode
    if len(states) == 2:
        raw = []
        for p, a, b in zip(positions, res.paths["on"], res.paths["off"]):
            try:
                raw.append(power_ratio(a, b, mode))
            except ZeroDivisionError as exc:
                raise PipelineError(f"position {p}: {exc}") from exc
        raw = np.array(raw)
        w = _window(sc.analysis.window, len(raw))
        res.power = PowerRatioSeries(np.array(positions), raw, moving_average(raw, w), w)
    res.capacity = region_report(positions, snrs, cap_mean, cap_std, res.regions())

    if flags.out is not None:
        res.files = write_outputs(res, sc, flags, seed, est_rows)
    return res


def write_outputs(res: PipelineResult, sc: Scenario, flags: RunFlags, seed: int,
                  est_rows) -> dict:
    out = Path(flags.out)
    out.mkdir(parents=True, exist_ok=True)
    texts = {"estimates.csv": _csv_text(ESTIMATE_COLUMNS, est_rows)}
    if res.power is not None:
        texts["power_ratio.csv"] = _csv_text(
            ("position", "raw", "smoothed"),
            zip(res.power.positions, res.power.raw, res.power.smoothed))
    cap = res.capacity
    rows = []
    for i, p in enumerate(res.positions):
        for st in res.states:
            for k, snr in enumerate(cap.snr_db):
                ratio = cap.ratio[i, k] if cap.ratio is not None else np.nan
                rows.append((p, st, snr, cap.mean[st][i, k], cap.std[st][i, k], ratio))
    texts["capacity.csv"] = _csv_text(("position", "state", "snr_db", "mean", "std", "ratio"),
                                      rows)
    rows = []
    for (region, st), m in sorted(cap.region_mean.items(), key=lambda kv: kv[0]):
        for k, snr in enumerate(cap.snr_db):
            rows.append((region, st, snr, m[k], cap.region_std[(region, st)][k]))
    texts["region_capacity.csv"] = _csv_text(("region", "state", "snr_db", "mean", "mean_std"),
                                             rows)
    files = {}
    for name, text in texts.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="")
        files[name] = path
    meta = [
        ("meta", "seed", seed),
        ("meta", "config_sha256", sc.config_hash()),
        ("meta", "mode", "estimate" if flags.estimate else "oracle-mpc"),
        ("meta", "ris", flags.ris),
        ("meta", "nlos_from", res.nlos_from),
        ("meta", "positions", _ranges(res.positions)),
        ("meta", "snr_db", " ".join(_fmt(float(s)) for s in cap.snr_db)),
        ("version", "risbeam", __version__),
        ("version", "numpy", np.__version__),
        ("version", "scipy", scipy.__version__),
        ("version", "python", platform.python_version()),
    ]
    for name in sorted(texts):
        meta.append(("file", name, hashlib.sha256(texts[name].encode()).hexdigest()))
    path = out / "manifest.csv"
    path.write_text(_csv_text(("kind", "name", "value"), meta), encoding="utf-8", newline="")
    files["manifest.csv"] = path
    return files


def _ranges(ps) -> str:
    ps = sorted(set(int(p) for p in ps))
    parts, i = [], 0
    while i < len(ps):
        j = i
        while j + 1 < len(ps) and ps[j + 1] == ps[j] + 1:
            j += 1
        parts.append(str(ps[i]) if i == j else f"{ps[i]}-{ps[j]}")
        i = j + 1
    return ",".join(parts)


def ris_aoa_span_deg(sets: Sequence[MpcSet]) -> float:
    """Azimuth range covered by the RIS path's arrival direction."""
    az = [np.degrees(m.aoa.azimuth) for s in sets for m in s.by_source("ris")]
    if not az:
        return 0.0
    az = np.degrees(np.unwrap(np.radians(az)))
    return float(np.max(az) - np.min(az))


__all__ = ["FILES", "PipelineError", "PipelineResult", "RunFlags", "ris_aoa_span_deg",
           "run_pipeline", "write_outputs"]
