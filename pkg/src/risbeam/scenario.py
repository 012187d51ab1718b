"""
Scenario files: TOML text describing the scene, hardware and run settings.

Every key is optional; missing keys take the defaults below and an empty
file yields the default office scene at full sounder scale.  Unknown keys
are rejected.  The grammar and every key are documented in
``docs/scenario-format.md``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from . import constants as C
from .arrays import ArrayGeometry, SounderTiming, octagonal_array, planar_array, single_element
from .blocker import calibrated_blocker
from .channel import FrequencyGrid, NoiseModel
from .geometry import RectSurface, SceneLayout, Trajectory, unit
from .ris import RisPanel, VisionSensor
from .sage import EstimatorConfig


class ScenarioError(ValueError):
    """Invalid scenario text or value; the message names the line or field."""


@dataclass
class PhysicsConfig:
    carrier_hz: float = C.CARRIER_HZ
    bandwidth_hz: float = C.BANDWIDTH_HZ
    n_freq: int = C.N_FREQ
    periodic_grid: bool = True
    switching_time_s: float = C.SWITCHING_TIME_S
    snapshot_time_s: float = C.FULL_SWEEP_TIME_S
    noise_std: float = 0.02
    kappa: float = 1.0

    def validate(self, path):
        _pos(self, path, "carrier_hz", "bandwidth_hz", "n_freq", "switching_time_s",
             "snapshot_time_s", "kappa")
        if self.noise_std < 0:
            raise ScenarioError(f"{path}.noise_std: must be >= 0")
        if self.bandwidth_hz >= 2 * self.carrier_hz:
            raise ScenarioError(f"{path}.bandwidth_hz: must be below twice the carrier")


@dataclass
class SurfaceConfig:
    name: str
    material: str
    center: tuple
    normal: tuple
    width: float
    height: float
    orientation_deg: float = 0.0
    loss_db: Optional[float] = None

    def validate(self, path):
        _vec(self, path, "center", "normal")
        _pos(self, path, "width", "height")
        try:
            self.build()
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None

    def build(self) -> RectSurface:
        return RectSurface(np.array(self.center), unit(self.normal), self.width, self.height,
                           np.radians(self.orientation_deg), self.material, self.name,
                           self.loss_db)


@dataclass
class SceneConfig:
    tx: tuple = (-0.889, 2.0, 0.0)
    rx_start: tuple = (0.0, 1.5, 0.0)
    rx_end: tuple = (C.TRAJECTORY_LENGTH_M, 1.5, 0.0)
    n_positions: int = C.N_SNAPSHOTS
    n_static_head: int = 14
    n_static_tail: int = 14
    speed_mps: float = C.RX_SPEED_MPS
    nlos_from: int = 40
    blocker_distance_m: float = 0.35
    blocker_height_m: float = 1.0
    blocker_margin_deg: float = 3.0
    surfaces: list = field(default_factory=lambda: default_surfaces())

    def validate(self, path):
        _vec(self, path, "tx", "rx_start", "rx_end")
        _pos(self, path, "n_positions", "blocker_distance_m", "blocker_height_m")
        if self.n_static_head < 0 or self.n_static_tail < 0:
            raise ScenarioError(f"{path}.n_static_head/n_static_tail: must be >= 0")
        if self.n_static_head + self.n_static_tail >= self.n_positions:
            raise ScenarioError(f"{path}.n_static_head: static pads leave no moving position")
        if self.speed_mps < 0:
            raise ScenarioError(f"{path}.speed_mps: must be >= 0")
        if not 0 < self.nlos_from < self.n_positions:
            raise ScenarioError(f"{path}.nlos_from: must lie in 1..{self.n_positions - 1}")
        for i, s in enumerate(self.surfaces):
            s.validate(f"{path}.surfaces[{i}]")


def default_surfaces() -> list:
    """Coated-steel whiteboard, two cabinet fronts and a small cluster of
    scatterers just in front of the TX along the direct bearing."""
    tx = np.array(SceneConfig.tx)
    aim = np.array([0.5, 1.5, 0.0])
    u = unit(aim - tx)
    perp = np.array([-u[1], u[0], 0.0])
    out = [
        SurfaceConfig("whiteboard", "metal", (0.2, -3.0, 0.0), (0.0, 1.0, 0.0), 3.0, 1.2,
                      loss_db=6.0),
        SurfaceConfig("cabinet-wood", "wood", (3.5, 1.2, 0.0), (-1.0, 0.0, 0.0), 1.1, 2.0),
        SurfaceConfig("cabinet-glass", "glass", (3.5, 2.3, 0.0), (-1.0, 0.0, 0.0), 1.1, 2.0),
    ]
    for k, o in enumerate((-0.03, 0.0, 0.03)):
        c = tx + 0.15 * u + o * perp
        out.append(SurfaceConfig(f"cluster-{k}", "scatterer",
                                 tuple(round(float(v), 6) for v in c),
                                 tuple(round(float(v), 6) for v in -u), 0.1, 0.1))
    return out


@dataclass
class ArrayConfig:
    kind: str = "planar"       # planar | octagonal | single
    rows: int = 8
    cols: int = 8
    faces: int = 8
    dual_pol: bool = True
    pol: str = "V"             # used when dual_pol is false
    spacing_m: Optional[float] = None
    q: float = 1.0
    yaw_deg: float = 0.0

    def validate(self, path):
        if self.kind not in ("planar", "octagonal", "single"):
            raise ScenarioError(f"{path}.kind: unknown array kind {self.kind!r}")
        _pos(self, path, "rows", "cols", "faces")
        if self.pol not in ("H", "V"):
            raise ScenarioError(f"{path}.pol: must be 'H' or 'V'")
        if self.spacing_m is not None and not self.spacing_m > 0:
            raise ScenarioError(f"{path}.spacing_m: must be > 0")
        if self.q < 0:
            raise ScenarioError(f"{path}.q: must be >= 0")

    def build(self) -> ArrayGeometry:
        yaw = np.radians(self.yaw_deg)
        if self.kind == "single":
            a = single_element(self.pol, self.q, self.dual_pol)
            return dataclasses.replace(a, yaw=yaw)
        if self.kind == "planar":
            a = planar_array(self.rows, self.cols, self.spacing_m, True, yaw, self.q)
        else:
            a = octagonal_array(self.faces, self.rows, self.cols, self.spacing_m, True,
                                yaw, self.q)
        if self.dual_pol:
            return a
        keep = [i for i, p in enumerate(a.pols) if p == self.pol]
        return ArrayGeometry(a.positions[keep], tuple(a.pols[i] for i in keep),
                             a.normals[keep], a.yaw, a.q, a.name)


@dataclass
class RisConfigSection:
    center: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 1.0, 0.0)
    rows: int = C.RIS_ROWS
    cols: int = C.RIS_COLS
    pitch_m: Optional[float] = None
    orientation_deg: float = 0.0
    amplitude: float = 1.0
    q: float = 1.0
    update_every: int = 1
    visibility_db: float = 10.0

    def validate(self, path):
        _vec(self, path, "center", "normal")
        _pos(self, path, "rows", "cols", "update_every", "visibility_db")
        if not 0 < self.amplitude <= 1:
            raise ScenarioError(f"{path}.amplitude: must lie in (0, 1]")
        if self.pitch_m is not None and not self.pitch_m > 0:
            raise ScenarioError(f"{path}.pitch_m: must be > 0")
        try:
            self.build()
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None

    def build(self) -> RisPanel:
        return RisPanel(np.array(self.center), unit(self.normal), self.rows, self.cols,
                        self.pitch_m, np.radians(self.orientation_deg), self.amplitude, self.q)


@dataclass
class VisionConfig:
    angular_std_deg: float = 0.0
    range_mode: str = "fixed"
    fixed_range_m: float = 2.0
    range_std_m: float = 0.0

    def validate(self, path):
        try:
            self.build()
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None

    def build(self) -> VisionSensor:
        return VisionSensor(np.radians(self.angular_std_deg), self.range_mode,
                            self.fixed_range_m, self.range_std_m)


@dataclass
class EstimatorSection:
    max_paths: int = 10
    tol: float = 1e-6
    max_sweeps: int = 20
    delay_step: float = 0.25
    angle_step_deg: float = 2.0
    doppler_step_hz: float = 0.1
    doppler_max_hz: float = 2.0
    threshold_db: float = 10.0
    dynamic_range_db: float = 40.0
    search_elevation: bool = False
    search_doppler: bool = False
    delay_candidates: int = 3
    polish_sweeps: int = 2

    def validate(self, path):
        try:
            self.build()
        except ValueError as exc:
            raise ScenarioError(str(exc).replace("estimator.", f"{path}.")) from None

    def build(self) -> EstimatorConfig:
        return EstimatorConfig(**dataclasses.asdict(self))


@dataclass
class AnalysisConfig:
    snr_db: tuple = tuple(float(x) for x in range(-10, 31, 5))
    window: int = 5
    power_mode: str = "vv-only"

    def validate(self, path):
        if not self.snr_db:
            raise ScenarioError(f"{path}.snr_db: needs at least one value")
        if self.window < 1 or self.window % 2 == 0:
            raise ScenarioError(f"{path}.window: must be a positive odd count")
        if self.power_mode not in ("vv-only", "full-pol"):
            raise ScenarioError(f"{path}.power_mode: must be 'vv-only' or 'full-pol'")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "results"

    def validate(self, path):
        if not 0 <= self.seed < 2 ** 64:
            raise ScenarioError(f"{path}.seed: must be an unsigned 64-bit integer")


@dataclass
class Scenario:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    tx_array: ArrayConfig = field(default_factory=lambda: ArrayConfig(yaw_deg=-50.0))
    rx_array: ArrayConfig = field(default_factory=lambda: ArrayConfig(
        kind="octagonal", rows=4, cols=4, faces=8))
    ris: RisConfigSection = field(default_factory=RisConfigSection)
    vision: VisionConfig = field(default_factory=VisionConfig)
    estimator: EstimatorSection = field(default_factory=EstimatorSection)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> "Scenario":
        for f in dataclasses.fields(self):
            getattr(self, f.name).validate(f.name)
        n = self.tx_array.build().size * self.rx_array.build().size
        if self.physics.snapshot_time_s < self.physics.switching_time_s * n * (1 - 1e-12):
            raise ScenarioError("physics.snapshot_time_s: shorter than one full switching "
                                f"sweep ({self.physics.switching_time_s * n:.6g} s)")
        try:
            layout = self.layout()
            self.blocker(layout)
        except ValueError as exc:
            raise ScenarioError(f"scene: {exc}") from None
        return self

    # -- builders ---------------------------------------------------------
    def grid(self) -> FrequencyGrid:
        p = self.physics
        return FrequencyGrid(p.carrier_hz, p.bandwidth_hz, p.n_freq, p.periodic_grid)

    def arrays(self) -> tuple[ArrayGeometry, ArrayGeometry]:
        return self.tx_array.build(), self.rx_array.build()

    def timing(self) -> SounderTiming:
        tx, rx = self.arrays()
        return SounderTiming(tx.size, rx.size, self.physics.switching_time_s,
                             self.physics.snapshot_time_s)

    def layout(self) -> SceneLayout:
        s = self.scene
        traj = Trajectory(np.array(s.rx_start), np.array(s.rx_end), s.n_positions,
                          s.n_static_head, s.n_static_tail, s.speed_mps)
        return SceneLayout(np.array(s.tx), traj, self.ris.build(),
                           [x.build() for x in s.surfaces])

    def blocker(self, layout: Optional[SceneLayout] = None, nlos_from: Optional[int] = None):
        layout = layout or self.layout()
        s = self.scene
        return calibrated_blocker(layout.tx, layout.rx_positions(),
                                  s.nlos_from if nlos_from is None else nlos_from,
                                  s.blocker_distance_m, s.blocker_height_m,
                                  s.blocker_margin_deg)

    def sensor(self) -> VisionSensor:
        return self.vision.build()

    def estimator_config(self) -> EstimatorConfig:
        return self.estimator.build()

    def noise(self, seed) -> NoiseModel:
        return NoiseModel(self.physics.noise_std, seed)

    def config_hash(self) -> str:
        return hashlib.sha256(serialize_scenario(self).encode()).hexdigest()


def desk_scenario() -> Scenario:
    """Default scene with reduced arrays: 4 x 4 dual-pol TX panel (32 ports),
    eight 1 x 2 dual-pol RX faces (32 ports)."""
    sc = Scenario()
    sc.tx_array = ArrayConfig(kind="planar", rows=4, cols=4, yaw_deg=-50.0)
    sc.rx_array = ArrayConfig(kind="octagonal", rows=1, cols=2, faces=8)
    return sc.validate()


# -- text <-> Scenario -------------------------------------------------------

_SECTIONS = {f.name: f for f in dataclasses.fields(Scenario)}
_TUPLE_FIELDS = {"tx", "rx_start", "rx_end", "center", "normal", "snr_db"}


def _pos(obj, path, *names):
    for n in names:
        v = getattr(obj, n)
        if not v > 0:
            raise ScenarioError(f"{path}.{n}: must be > 0, got {v!r}")


def _vec(obj, path, *names):
    for n in names:
        v = getattr(obj, n)
        if len(v) != 3 or not all(np.isfinite(v)):
            raise ScenarioError(f"{path}.{n}: must be three finite numbers")


def _line_of(text: str, key: str) -> Optional[int]:
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith(key) and s[len(key):].lstrip().startswith("="):
            return i
    return None


def _where(text, path, key):
    line = _line_of(text, key) if text is not None else None
    return f"{path}.{key}" + (f" (line {line})" if line else "")


def _coerce(value, default, ftype: str, where: str):
    """Convert a TOML value to the type of the field it fills."""
    if "tuple" in ftype:
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ScenarioError(f"{where}: expected an array of numbers")
        return tuple(float(v) for v in value)
    if "bool" in ftype:
        if not isinstance(value, bool):
            raise ScenarioError(f"{where}: expected true or false")
        return value
    if "int" in ftype:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{where}: expected an integer")
        return value
    if "float" in ftype:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{where}: expected a number")
        return float(value)
    if "str" in ftype:
        if not isinstance(value, str):
            raise ScenarioError(f"{where}: expected a string")
        return value
    raise ScenarioError(f"{where}: unsupported value")  # pragma: no cover


def _fill(cls, table: dict, path: str, text, base=None):
    if not isinstance(table, dict):
        raise ScenarioError(f"{path}: expected a table")
    obj = base if base is not None else cls()
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in table.items():
        where = _where(text, path, key)
        if key not in known:
            raise ScenarioError(f"{where}: unknown key")
        f = known[key]
        if key == "surfaces":
            if not isinstance(value, list):
                raise ScenarioError(f"{where}: expected an array of tables")
            value = [_surface(v, f"{path}.surfaces[{i}]", text) for i, v in enumerate(value)]
        else:
            value = _coerce(value, getattr(obj, key), str(f.type), where)
        setattr(obj, key, value)
    return obj


def _surface(table, path, text) -> SurfaceConfig:
    if not isinstance(table, dict):
        raise ScenarioError(f"{path}: expected a table")
    required = ("name", "material", "center", "normal", "width", "height")
    missing = [k for k in required if k not in table]
    if missing:
        raise ScenarioError(f"{path}: missing required key(s) {', '.join(missing)}")
    proto = SurfaceConfig("", "metal", (0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 1.0, 1.0)
    return _fill(SurfaceConfig, table, path, text, proto)


def scenario_from_dict(data: dict, text: Optional[str] = None) -> Scenario:
    sc = Scenario()
    for key, value in data.items():
        if key not in _SECTIONS:
            raise ScenarioError(_where(text, "", key).lstrip(".") + ": unknown section")
        section = getattr(sc, key)
        setattr(sc, key, _fill(type(section), value, key, text, section))
    return sc.validate()


def loads_scenario(text: str) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None
    return scenario_from_dict(data, text)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"scenario file not found: {p}")
    return loads_scenario(p.read_text(encoding="utf-8"))


def _plain(obj):
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, list):
            v = [_plain(x) for x in v]
        out[f.name] = v
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    return {f.name: _plain(getattr(sc, f.name)) for f in dataclasses.fields(sc)}


def serialize_scenario(sc: Scenario) -> str:
    """Canonical TOML text; parses back to an equal Scenario."""
    return tomli_w.dumps(scenario_to_dict(sc))


__all__ = ["Scenario", "ScenarioError", "default_surfaces", "desk_scenario", "loads_scenario",
           "parse_scenario", "scenario_from_dict", "scenario_to_dict", "serialize_scenario"]
