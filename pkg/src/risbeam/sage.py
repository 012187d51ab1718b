"""
Multipath parameter extraction: successive-interference-cancellation
start-up followed by space-alternating EM refinement.

For a path with structural parameters ``theta = (tau, nu, aod, aoa)`` the
contribution to the CTF is linear in the 2 x 2 polarimetric weights::

    s = sum_{r,t} gamma[r, t] * A_rt(theta)
    A_rt[f, s, m, n] = b_R[r, f, n] b_T[t, f, m] exp(-j 2 pi f tau) D[f, s, m, n]

so for fixed ``theta`` the least-squares weights are ``gamma = G^+ c`` with
``c_rt = <A_rt, X>`` and Gram matrix ``G``.  Substituting back, the squared
residual is ``||X||^2 - J(theta)`` with ``J = c^H G^+ c``; every search below
maximises ``J``.

The start-up search is narrowband in angle (steering at the centre
frequency) and exact in delay.  Refinement uses the full wideband model.
Each coordinate step keeps the previous value unless a strictly better one
is found, which makes the data log-likelihood non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .arrays import ArrayGeometry, SounderTiming, array_response
from .channel import Ctf, Mpc, MpcSet
from .constants import db2lin, lin2db
from .geometry import Direction, canonical_azimuth, direction_vector

_DELAY_XATOL = 1e-4   # in units of 1/B
_ANGLE_XATOL = 1e-6   # radians
_DOPPLER_XATOL = 1e-4  # Hz
_LOCAL_POINTS = 9


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Estimator settings.

    Parameters
    ----------
    max_paths : int
        Upper bound on the number of extracted paths.
    tol : float
        Stop once a sweep lowers the residual energy by less than ``tol``
        times the observation energy.
    max_sweeps : int
        Cap on refinement sweeps.
    delay_step : float
        Start-up delay grid spacing as a fraction of ``1/B``.  Rounded to
        ``1/k`` for an integer ``k`` so the search can use a padded FFT.
    angle_step_deg : float
        Start-up azimuth grid spacing, also the half-width scale of the
        local angle searches.
    doppler_step_hz, doppler_max_hz : float
        Doppler grid spacing and symmetric search range.
    threshold_db : float
        Detection threshold above the noise floor.
    dynamic_range_db : float
        Paths weaker than the strongest one by more than this are dropped.
    search_elevation, search_doppler : bool
        Enable the optional elevation and Doppler coordinates.
    delay_candidates : int
        Number of delay-profile peaks whose angles are searched at start-up.
    polish_sweeps : int
        Single-path coordinate passes applied to each new start-up path.
    """

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

    def __post_init__(self):
        for name in ("max_paths", "tol", "max_sweeps", "delay_step", "angle_step_deg",
                     "doppler_step_hz", "doppler_max_hz", "threshold_db",
                     "dynamic_range_db", "delay_candidates"):
            if not getattr(self, name) > 0:
                raise ValueError(f"estimator.{name} must be > 0")
        if self.polish_sweeps < 0:
            raise ValueError("estimator.polish_sweeps must be >= 0")
        if self.delay_step > 1:
            raise ValueError("estimator.delay_step must be <= 1")

    @property
    def oversampling(self) -> int:
        return max(1, int(round(1.0 / self.delay_step)))


@dataclass
class PathEstimate:
    """Estimated path: Mpc parameters plus fit diagnostics.

    `power_db` is the path energy relative to the observation energy;
    `grid_cell` records the start-up (delay, AOD, AOA) grid indices.
    """

    delay: float
    doppler: float
    aod: Direction
    aoa: Direction
    gamma: np.ndarray
    power_db: float = -np.inf
    converged: bool = False
    above_threshold: bool = True
    grid_cell: Optional[tuple] = None

    def to_mpc(self) -> Mpc:
        return Mpc(self.delay, self.doppler, self.aod, self.aoa, np.array(self.gamma),
                   "estimated")


@dataclass
class _Params:
    tau: float
    nu: float = 0.0
    aod_az: float = 0.0
    aod_el: float = 0.0
    aoa_az: float = 0.0
    aoa_el: float = 0.0

    def copy(self):
        return _Params(self.tau, self.nu, self.aod_az, self.aod_el, self.aoa_az, self.aoa_el)


@dataclass
class _Model:
    tx: ArrayGeometry
    rx: ArrayGeometry
    freqs: np.ndarray
    center: float
    times: np.ndarray           # (S, M_T, M_R)
    bandwidth: float
    _cache: dict = field(default_factory=dict)

    @classmethod
    def build(cls, ctf: Ctf, tx, rx, timing):
        nf, ns, nt, nr = ctf.shape
        if tx.size != nt or rx.size != nr:
            raise ValueError(f"CTF has {nt}x{nr} channels but arrays have {tx.size}x{rx.size}")
        timing = timing or SounderTiming(nt, nr)
        return cls(tx, rx, ctf.grid.freqs(), ctf.grid.center,
                   timing.sample_times(range(ns)), ctf.grid.bandwidth)

    def bt(self, az, el):
        return array_response(self.tx, direction_vector(az, el), self.freqs)   # (2, F, M_T)

    def br(self, az, el):
        return array_response(self.rx, direction_vector(az, el), self.freqs)   # (2, F, M_R)

    def delay_phase(self, tau):
        return np.exp(-2j * np.pi * self.freqs * tau)

    def doppler(self, nu):
        if nu == 0.0:
            return None
        return np.exp(-2j * np.pi * (self.freqs / self.center)[:, None, None, None]
                      * nu * self.times[None])

    def gram(self, bt, br, n_snap):
        gt = np.einsum("tfm,ufm->ftu", bt.conj(), bt)
        gr = np.einsum("rfn,qfn->frq", br.conj(), br)
        g = n_snap * np.einsum("frq,ftu->rtqu", gr, gt)
        return g.reshape(4, 4)

    def synth(self, p: _Params, gamma):
        bt, br = self.bt(p.aod_az, p.aod_el), self.br(p.aoa_az, p.aoa_el)
        h = np.einsum("rt,rfn,tfm->fmn", gamma, br, bt, optimize=True)
        h *= self.delay_phase(p.tau)[:, None, None]
        h = np.repeat(h[:, None], self.times.shape[0], axis=1)
        d = self.doppler(p.nu)
        return h * d if d is not None else h


def _solve(g, c):
    """Concentrated objective and LS weights for Gram `g`, projections `c` (4,)."""
    gi = np.linalg.pinv(g, rcond=1e-10, hermitian=True)
    w = gi @ c
    return float(np.real(np.vdot(c, w))), w.reshape(2, 2)


class _Objective:
    """J(theta) on a fixed data tensor, with per-coordinate precomputation."""

    def __init__(self, model: _Model, x: np.ndarray):
        self.m = model
        self.x = x
        self.ns = x.shape[1]

    def _xd(self, p):
        d = self.m.doppler(p.nu)
        return self.x if d is None else self.x * d.conj()

    def evaluate(self, p: _Params):
        m = self.m
        bt, br = m.bt(p.aod_az, p.aod_el), m.br(p.aoa_az, p.aoa_el)
        e = m.delay_phase(p.tau).conj()
        c = np.einsum("fsmn,rfn,tfm,f->rt", self._xd(p), br.conj(), bt.conj(), e, optimize=True)
        return _solve(m.gram(bt, br, self.ns), c.ravel())

    def line(self, p: _Params, coord: str):
        """Return ``value -> J`` with everything independent of `coord` precomputed."""
        m = self.m
        if coord == "nu":
            def f(v):
                q = p.copy()
                q.nu = v
                return self.evaluate(q)[0]
            return f
        xd = self._xd(p)
        bt, br = m.bt(p.aod_az, p.aod_el), m.br(p.aoa_az, p.aoa_el)
        if coord == "tau":
            z = np.einsum("fsmn,rfn,tfm->frt", xd, br.conj(), bt.conj(), optimize=True)
            g = m.gram(bt, br, self.ns)

            def f(v):
                c = np.einsum("frt,f->rt", z, m.delay_phase(v).conj())
                return _solve(g, c.ravel())[0]
            return f
        e = m.delay_phase(p.tau).conj()
        if coord in ("aod_az", "aod_el"):
            w = np.einsum("fsmn,rfn,f->frm", xd, br.conj(), e, optimize=True)

            def f(v):
                az, el = (v, p.aod_el) if coord == "aod_az" else (p.aod_az, v)
                b = m.bt(az, el)
                c = np.einsum("frm,tfm->rt", w, b.conj())
                return _solve(m.gram(b, br, self.ns), c.ravel())[0]
            return f
        if coord in ("aoa_az", "aoa_el"):
            w = np.einsum("fsmn,tfm,f->ftn", xd, bt.conj(), e, optimize=True)

            def f(v):
                az, el = (v, p.aoa_el) if coord == "aoa_az" else (p.aoa_az, v)
                b = m.br(az, el)
                c = np.einsum("ftn,rfn->rt", w, b.conj())
                return _solve(m.gram(bt, b, self.ns), c.ravel())[0]
            return f
        raise ValueError(f"unknown coordinate {coord!r}")


def _line_search(fun, x0, f0, grid, bounds, xatol):
    """Coarse grid then bounded Brent polish; never returns worse than `x0`."""
    best_x, best_f = x0, f0
    vals = [fun(x) for x in grid]
    k = int(np.argmax(vals))
    if vals[k] > best_f:
        best_x, best_f = grid[k], vals[k]
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    if hi > lo:
        res = minimize_scalar(lambda x: -fun(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol})
        if -res.fun > best_f:
            best_x, best_f = float(res.x), float(-res.fun)
    return best_x, best_f


def _coords(cfg: EstimatorConfig):
    c = ["tau", "aod_az", "aoa_az"]
    if cfg.search_elevation:
        c += ["aod_el", "aoa_el"]
    if cfg.search_doppler:
        c.append("nu")
    return c


def _update_path(obj: _Objective, p: _Params, j0: float, cfg: EstimatorConfig, bw: float):
    """One coordinate pass over all enabled parameters of a single path."""
    p = p.copy()
    j = j0
    da = np.radians(cfg.angle_step_deg)
    for coord in _coords(cfg):
        fun = obj.line(p, coord)
        x0 = getattr(p, coord)
        if coord == "tau":
            hw = 2 * cfg.delay_step / bw
            grid = x0 + np.linspace(-hw, hw, _LOCAL_POINTS)
            bounds, xatol = (0.0, np.inf), _DELAY_XATOL / bw
            grid = grid[grid >= 0]
        elif coord == "nu":
            grid = np.arange(-cfg.doppler_max_hz, cfg.doppler_max_hz + 1e-12, cfg.doppler_step_hz)
            bounds, xatol = (-cfg.doppler_max_hz, cfg.doppler_max_hz), _DOPPLER_XATOL
        elif coord.endswith("el"):
            grid = np.clip(x0 + np.linspace(-2 * da, 2 * da, _LOCAL_POINTS), -np.pi / 2, np.pi / 2)
            bounds, xatol = (-np.pi / 2, np.pi / 2), _ANGLE_XATOL
        else:
            grid = x0 + np.linspace(-2 * da, 2 * da, _LOCAL_POINTS)
            bounds, xatol = (-np.inf, np.inf), _ANGLE_XATOL
        x, j = _line_search(fun, x0, j, grid, bounds, xatol)
        setattr(p, coord, x)
    return p, j


def noise_floor(data: np.ndarray) -> float:
    """Per-element, per-delay-bin noise power of the impulse response.

    The median bin power divided by ln 2, which is unbiased for complex
    Gaussian noise when most bins hold no path.
    """
    h = np.fft.ifft(data, axis=0)
    return float(np.median(np.abs(h) ** 2) / np.log(2))


def _coarse_search(model: _Model, r: np.ndarray, cfg: EstimatorConfig):
    """Best (delay, AOD az, AOA az) cell of the narrowband matched filter."""
    nf = r.shape[0]
    ov = cfg.oversampling
    h = np.fft.ifft(r, n=ov * nf, axis=0)
    pdp = np.sum(np.abs(h) ** 2, axis=(1, 2, 3))
    if not np.any(pdp > 0):
        return None
    peaks = np.flatnonzero((pdp >= np.roll(pdp, 1)) & (pdp >= np.roll(pdp, -1)) & (pdp > 0))
    peaks = peaks[np.argsort(pdp[peaks])[::-1][:cfg.delay_candidates]]

    n_az = max(1, int(round(360.0 / cfg.angle_step_deg)))
    az = 2 * np.pi * np.arange(n_az) / n_az
    u = direction_vector(az, 0.0)
    fc = np.array([model.center])
    bt = array_response(model.tx, u, fc)[:, :, 0, :]   # (2, G, M_T)
    br = array_response(model.rx, u, fc)[:, :, 0, :]   # (2, G, M_R)
    nt = np.sum(np.abs(bt) ** 2, axis=-1)              # (2, G)
    nr = np.sum(np.abs(br) ** 2, axis=-1)
    wt = np.where(nt > 0, 1.0 / np.where(nt > 0, nt, 1.0), 0.0)
    wr = np.where(nr > 0, 1.0 / np.where(nr > 0, nr, 1.0), 0.0)
    bt2 = bt.conj().reshape(2 * n_az, -1)
    br2 = br.conj().reshape(2 * n_az, -1)

    best = None
    for k in peaks:
        y = h[k]                                        # (S, M_T, M_R)
        score = np.zeros((n_az, n_az))
        for s in range(y.shape[0]):
            c = (bt2 @ y[s] @ br2.T).reshape(2, n_az, 2, n_az)   # (t, gT, r, gR)
            score += np.einsum("tgrh,tg,rh->gh", np.abs(c) ** 2, wt, wr)
        g, hh = np.unravel_index(int(np.argmax(score)), score.shape)
        if best is None or score[g, hh] > best[0]:
            best = (score[g, hh], int(k), int(g), int(hh))
    _, k, g, hh = best
    tau = k / (ov * nf * (model.freqs[1] - model.freqs[0])) if nf > 1 else 0.0
    return _Params(tau, 0.0, az[g], 0.0, az[hh], 0.0), (k, g, hh)


def _finish(p: _Params, gamma, power, converged, cell) -> PathEstimate:
    el_t = float(np.clip(p.aod_el, -np.pi / 2, np.pi / 2))
    el_r = float(np.clip(p.aoa_el, -np.pi / 2, np.pi / 2))
    return PathEstimate(float(p.tau), float(p.nu),
                        Direction(canonical_azimuth(p.aod_az), el_t),
                        Direction(canonical_azimuth(p.aoa_az), el_r),
                        np.array(gamma, dtype=complex), power, converged,
                        True, cell)


def _to_params(e: PathEstimate) -> _Params:
    return _Params(e.delay, e.doppler, e.aod.azimuth, e.aod.elevation,
                   e.aoa.azimuth, e.aoa.elevation)


def initialize_sic(ctf: Ctf, cfg: EstimatorConfig, tx_array: ArrayGeometry,
                   rx_array: ArrayGeometry, timing: Optional[SounderTiming] = None) -> list:
    """
    Successive start-up: find the strongest residual path on the coarse grid,
    polish it alone, fit its weights, subtract, repeat.

    Stops at `cfg.max_paths`, when the fitted path's mean per-entry power
    falls below the detection threshold, or when it drops out of the
    dynamic range of the strongest path.  Returns an empty list for an
    all-zero CTF.
    """
    model = _Model.build(ctf, tx_array, rx_array, timing)
    y = ctf.data
    total = float(np.sum(np.abs(y) ** 2))
    if total == 0.0:
        return []
    thr = db2lin(cfg.threshold_db) * noise_floor(y)
    r = y.copy()
    out, strongest = [], None
    for _ in range(cfg.max_paths):
        found = _coarse_search(model, r, cfg)
        if found is None:
            break
        p, cell = found
        obj = _Objective(model, r)
        j, w = obj.evaluate(p)
        for _ in range(cfg.polish_sweeps):
            p, j = _update_path(obj, p, j, cfg, model.bandwidth)
        j, w = obj.evaluate(p)
        s = model.synth(p, w)
        power = float(np.mean(np.abs(s) ** 2))
        if power <= thr:
            break
        if strongest is not None and power < strongest * db2lin(-cfg.dynamic_range_db):
            break
        strongest = power if strongest is None else max(strongest, power)
        r = r - s
        out.append(_finish(p, w, float(lin2db(np.sum(np.abs(s) ** 2) / total)), False, cell))
    return out


def sage_refine(ctf: Ctf, estimates: list, cfg: EstimatorConfig, tx_array: ArrayGeometry,
                rx_array: ArrayGeometry, timing: Optional[SounderTiming] = None,
                trace: Optional[list] = None) -> list:
    """
    SAGE sweeps over the paths in `estimates`.

    Each path in turn gets its admissible data (the observation minus every
    other path) and a coordinate pass: delay, AOD azimuth, AOA azimuth,
    then elevations and Doppler when enabled, then weights by least squares.

    If `trace` is a list, the residual energy before the first sweep and
    after every sweep is appended to it; the data log-likelihood is the
    negative of that energy over the noise variance.
    """
    if not estimates:
        return []
    model = _Model.build(ctf, tx_array, rx_array, timing)
    y = ctf.data
    total = float(np.sum(np.abs(y) ** 2))
    thr = db2lin(cfg.threshold_db) * noise_floor(y)
    params = [_to_params(e) for e in estimates]
    gammas = [np.array(e.gamma, dtype=complex) for e in estimates]
    sig = [model.synth(p, g) for p, g in zip(params, gammas)]
    r = y - sum(sig)
    prev = float(np.sum(np.abs(r) ** 2))
    if trace is not None:
        trace.append(prev)
    converged = False
    for _ in range(cfg.max_sweeps):
        for i, p in enumerate(params):
            x = r + sig[i]
            obj = _Objective(model, x)
            j0, w0 = obj.evaluate(p)
            q, j = _update_path(obj, p, j0, cfg, model.bandwidth)
            j, w = obj.evaluate(q)
            if j < j0:   # numerical safety, keep the previous optimum
                q, j, w = p, j0, w0
            params[i], gammas[i] = q, w
            sig[i] = model.synth(q, w)
            r = x - sig[i]
        cur = float(np.sum(np.abs(r) ** 2))
        if trace is not None:
            trace.append(cur)
        gain = (prev - cur) / total if total > 0 else 0.0
        prev = cur
        if gain < cfg.tol:
            converged = True
            break
    out = []
    for p, g, s, e in zip(params, gammas, sig, estimates):
        est = _finish(p, g, float(lin2db(max(np.sum(np.abs(s) ** 2), 1e-300) / total)),
                      converged, e.grid_cell)
        est.above_threshold = bool(np.mean(np.abs(s) ** 2) > thr)
        out.append(est)
    return out


def estimate_paths(ctf: Ctf, cfg: EstimatorConfig, tx_array: ArrayGeometry,
                   rx_array: ArrayGeometry, timing: Optional[SounderTiming] = None) -> list:
    """Start-up followed by refinement."""
    init = initialize_sic(ctf, cfg, tx_array, rx_array, timing)
    return sage_refine(ctf, init, cfg, tx_array, rx_array, timing)


def estimates_to_mpcs(estimates, position: int = 0, scenario: str = "ris-on") -> MpcSet:
    """Estimated paths as an MpcSet, dropping those below the detection threshold."""
    kept = [e.to_mpc() for e in estimates if e.above_threshold]
    return MpcSet(kept, position, scenario, "unknown")


__all__ = ["EstimatorConfig", "PathEstimate", "estimate_paths", "estimates_to_mpcs",
           "initialize_sic", "noise_floor", "sage_refine"]
