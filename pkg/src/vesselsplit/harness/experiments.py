"""Experiment drivers: single simulations, convergence-order sweeps, long-run
energy and global-error tables, control-norm and energy time series.

Long reference runs are cached on disk (``.npz`` keyed by a content hash of
everything that determines the trajectory); see :func:`cached_integrate`.
"""

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..integrators import Trajectory, Verdict, integrate
from ..rotations import _euler_from_rot, _euler_rodrigues
from ..vessel_model import OMEGA, V, X

# step sizes and methods of the standard tables
ENERGY_TABLE_H = (0.05, 0.10, 0.20, 1.00, 1.95, 2.00, 3.00, 5.00, 6.00)
ENERGY_TABLE_METHODS = ("IE", "RK4", "SP2", "SP4")
GLOBAL_TABLE_H = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 1.95, 2.0, 3.0, 5.0)
GLOBAL_TABLE_METHODS = ("IE", "RK4", "SP2", "SP4")
ORDER_METHODS = ("SP2", "SP4", "SP6")
COMPONENTS = ("omega", "theta", "v", "x")

# errors outside this band are not used for slope fits: below it the
# reference solution's own error dominates, above it the method is not yet
# in its asymptotic regime
FIT_BAND = (1e-12, 1e-2)


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------

def cache_dir():
    """Directory of cached trajectories (``$VESSELSPLIT_CACHE`` or ``~/.cache/vesselsplit``)."""
    root = os.environ.get("VESSELSPLIT_CACHE")
    return Path(root) if root else Path.home() / ".cache" / "vesselsplit"


_SOURCE_HASH = None


def _source_hash():
    """Digest of the numerical modules, so edits to them invalidate the cache."""
    global _SOURCE_HASH
    if _SOURCE_HASH is None:
        d = hashlib.sha256()
        for f in sorted(Path(__file__).resolve().parent.parent.glob("*.py")):
            d.update(f.read_bytes())
        _SOURCE_HASH = d.hexdigest()[:16]
    return _SOURCE_HASH


def _run_key(cfg, method, h, t_end, stride, diagnostics):
    desc = cfg.describe()
    desc["t_span"] = [float(cfg.t_span[0]), float(t_end)]
    desc.update(method=method, h=float(h), stride=int(stride), diagnostics=bool(diagnostics),
                version=__version__, source=_source_hash())
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()[:24]


def _save(path, traj):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.npz")
    os.close(fd)
    try:
        np.savez(tmp, times=traj.times, states=traj.states, hamiltonians=traj.hamiltonians,
                 control_norms=traj.control_norms, verdict=traj.verdict.value,
                 message=traj.message, method=traj.method, h=traj.h)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _load(path):
    with np.load(path) as d:
        return Trajectory(d["times"], d["states"], d["hamiltonians"], d["control_norms"],
                          Verdict(str(d["verdict"])), str(d["method"]), float(d["h"]),
                          str(d["message"]))


def cached_integrate(cfg, method, h, t_end=None, stride=1, diagnostics=True, use_cache=True):
    """:func:`~vesselsplit.integrators.integrate` on ``cfg``, memoised on disk.

    The cache write is atomic (temporary file plus rename), so concurrent
    drivers never observe partial files.
    """
    t_end = cfg.t_span[1] if t_end is None else t_end
    path = cache_dir() / f"{method}_{_run_key(cfg, method, h, t_end, stride, diagnostics)}.npz"
    if use_cache and path.exists():
        return _load(path)
    traj = integrate(cfg.s0, cfg.t_span[0], t_end, h, method, cfg.params, cfg.ctrl, stride=stride,
                     magnus_order=cfg.magnus_order, activation=cfg.activation,
                     diagnostics=diagnostics)
    if use_cache:
        _save(path, traj)
    return traj


def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, *zip(*jobs)))
    return [fn(*job) for job in jobs]


def reference_on_grid(cfg, h, t_end, h_ref, use_cache=True):
    """Reference RK4 run with a step ``h / k`` close to ``h_ref`` recorded every ``k`` steps,
    so that its records coincide with the grid of step ``h``."""
    k = max(1, int(round(h / h_ref)))
    return cached_integrate(cfg, "RK4", h / k, t_end, stride=k, use_cache=use_cache)


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def euler_angles(states):
    """ZYX angles of each row of a packed state array (no singularity check)."""
    states = np.atleast_2d(states)
    return np.array([_euler_from_rot(_euler_rodrigues(y[3:7])) for y in states])


def component_errors(y, y_ref):
    """Relative 2-norm errors of omega, Euler angles, v and x at one instant."""
    ang, ang_ref = euler_angles(y)[0], euler_angles(y_ref)[0]
    out = {}
    for name, a, b in (("omega", y[OMEGA], y_ref[OMEGA]), ("theta", ang, ang_ref),
                       ("v", y[V], y_ref[V]), ("x", y[X], y_ref[X])):
        nrm = np.linalg.norm(b)
        out[name] = float(np.linalg.norm(a - b) / nrm) if nrm > 0 else float(np.linalg.norm(a - b))
    return out


def fit_slope(hs, errs, band=FIT_BAND):
    """Least-squares slope of ``log(err)`` against ``log(h)`` over errors inside ``band``.

    Returns ``(slope, n_points)``; the slope is NaN with fewer than two points.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = np.isfinite(errs) & (errs >= band[0]) & (errs <= band[1])
    if ok.sum() < 2:
        return float("nan"), int(ok.sum())
    return float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0]), int(ok.sum())


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_simulation(cfg, method=None, h=None, use_cache=False):
    """Integrate the configured scenario with one method and step size."""
    method = cfg.methods[0] if method is None else method
    h = cfg.h_list[0] if h is None else h
    return cached_integrate(cfg, method, h, stride=cfg.output_stride, use_cache=use_cache)


@dataclass
class OrderStudy:
    rows: list  # dicts: method, h, verdict, omega, theta, v, x
    slopes: dict  # (method, component) -> (slope, n_points)
    t_end: float
    h_ref: float
    meta: dict = field(default_factory=dict)


def _endpoint(cfg, method, h, t_end, use_cache):
    traj = cached_integrate(cfg, method, h, t_end, stride=10 ** 12, diagnostics=False,
                            use_cache=use_cache)
    return traj.verdict, traj.states[-1], traj.message


def order_study(cfg, methods=ORDER_METHODS, ks=range(10), t_end=10.0, h_ref=1e-4,
                workers=1, use_cache=True, t_on=0.0):
    """Endpoint relative errors for ``h = 2^-k`` against a fine RK4 reference.

    The controller is switched on at ``t_on`` (default: from the start); with
    the scenario's ``t_on = 50`` the translational state would stay exactly
    at rest on ``[0, 10]`` and its errors would be zero.  ``t_on=None`` keeps
    the configured value.
    """
    if t_on is not None:
        cfg = replace(cfg, ctrl=replace(cfg.ctrl, t_on=float(t_on)))
    ref = _endpoint(cfg, "RK4", h_ref, t_end, use_cache)[1]
    hs = [2.0 ** -k for k in ks]
    jobs = [(cfg, m, h, t_end, use_cache) for m in methods for h in hs]
    results = _map(_endpoint, jobs, workers)
    rows = []
    for (_, m, h, _, _), (verdict, y, _) in zip(jobs, results):
        row = {"method": m, "h": h, "verdict": verdict.value}
        errs = component_errors(y, ref) if verdict == Verdict.completed else dict.fromkeys(COMPONENTS, np.nan)
        row.update(errs)
        rows.append(row)
    slopes = {}
    for m in methods:
        sub = [r for r in rows if r["method"] == m]
        for comp in COMPONENTS:
            slopes[(m, comp)] = fit_slope([r["h"] for r in sub], [r[comp] for r in sub])
    return OrderStudy(rows, slopes, t_end, h_ref, {"t_on": cfg.ctrl.t_on})


@dataclass
class ErrorTable:
    """Long-form table: one row per (method, h) with a verdict and an error value."""

    kind: str
    rows: list  # dicts: method, h, verdict, error
    hs: tuple
    methods: tuple
    t_end: float
    h_ref: float
    reference: float = float("nan")

    def cell(self, method, h):
        for r in self.rows:
            if r["method"] == method and np.isclose(r["h"], h):
                return r
        raise KeyError((method, h))

    def wide(self):
        """Rows ``[h, value-or-'-', ...]`` in method column order."""
        out = []
        for h in self.hs:
            line = [h]
            for m in self.methods:
                r = self.cell(m, h)
                line.append(r["error"] if r["verdict"] == "completed" else "-")
            out.append(line)
        return out


def _final_energy(cfg, method, h, t_end, use_cache):
    traj = cached_integrate(cfg, method, h, t_end, stride=10 ** 12, use_cache=use_cache)
    return traj.verdict, float(traj.hamiltonians[-1]), traj.message


def energy_table(cfg, hs=ENERGY_TABLE_H, methods=ENERGY_TABLE_METHODS, t_end=50000.0, h_ref=0.005,
                 scale=1, workers=1, use_cache=True):
    """Relative energy error ``|H_n - H(t_n)| / H(t_n)`` at ``t_end / scale``."""
    t_end = t_end / scale
    _, h_exact, _ = _final_energy(cfg, "RK4", h_ref, t_end, use_cache)
    jobs = [(cfg, m, h, t_end, use_cache) for h in hs for m in methods]
    rows = []
    for (_, m, h, _, _), (verdict, hn, msg) in zip(jobs, _map(_final_energy, jobs, workers)):
        err = abs(hn - h_exact) / abs(h_exact) if verdict == Verdict.completed else float("nan")
        rows.append({"method": m, "h": h, "verdict": verdict.value, "error": err, "note": msg})
    return ErrorTable("relative_energy_error", rows, tuple(hs), tuple(methods), t_end, h_ref, h_exact)


# state blocks entering the global-error norm: the mechanical state
# (omega, q, v, x) or everything including the PID integral states
GLOBAL_NORM_SLICES = {"mechanical": slice(0, 13), "full": slice(0, 19)}


def global_error_table(cfg, hs=GLOBAL_TABLE_H, methods=GLOBAL_TABLE_METHODS, t_end=780.0, h_ref=1e-4,
                       scale=1, workers=1, use_cache=True, norm="mechanical"):
    """Relative global error ``|y_n - y(t_n)| / |y(t_n)|`` at ``t_end / scale``.

    ``norm="mechanical"`` measures ``y = (omega, q, v, x)`` in quaternion form;
    ``norm="full"`` also includes the integral states ``phi_theta, phi_x``.
    """
    if norm not in GLOBAL_NORM_SLICES:
        raise ValueError(f"norm must be one of {sorted(GLOBAL_NORM_SLICES)}, got {norm!r}")
    sl = GLOBAL_NORM_SLICES[norm]
    t_end = t_end / scale
    ref = _endpoint(cfg, "RK4", h_ref, t_end, use_cache)[1][sl]
    jobs = [(cfg, m, h, t_end, use_cache) for h in hs for m in methods]
    rows = []
    for (_, m, h, _, _), (verdict, y, msg) in zip(jobs, _map(_endpoint, jobs, workers)):
        ok = verdict == Verdict.completed
        err = float(np.linalg.norm(y[sl] - ref) / np.linalg.norm(ref)) if ok else float("nan")
        rows.append({"method": m, "h": h, "verdict": verdict.value, "error": err, "note": msg})
    return ErrorTable("relative_global_error", rows, tuple(hs), tuple(methods), t_end, h_ref,
                      float(np.linalg.norm(ref)))


@dataclass
class TimeSeries:
    """Per-step series of several methods on a common grid ``t = n h``."""

    h: float
    times: np.ndarray
    series: dict  # label -> (n, k) array, NaN after a failure
    columns: tuple
    verdicts: dict


def _aligned(traj, n):
    """Pad a (possibly truncated) trajectory to ``n`` records with NaN."""
    k = len(traj.times)
    pad = lambda a: np.concatenate([a, np.full((n - k,) + a.shape[1:], np.nan)]) if k < n else a[:n]
    return pad(traj.hamiltonians), pad(traj.control_norms)


def control_norm_study(cfg, h=1.95, methods=("SP4", "RK4"), t_end=110.0, h_ref=0.005, use_cache=True):
    """``|T^-1 tau_r|`` and ``|m_v^-1 tau_t|`` at every step for each method and the reference."""
    ref = reference_on_grid(cfg, h, t_end, h_ref, use_cache)
    n = len(ref.times)
    times = cfg.t_span[0] + np.arange(n) * h
    times[-1] = ref.times[-1]
    series = {"reference": ref.control_norms}
    verdicts = {"reference": ref.verdict.value}
    for m in methods:
        traj = cached_integrate(cfg, m, h, t_end, use_cache=use_cache)
        series[m] = _aligned(traj, n)[1]
        verdicts[m] = traj.verdict.value
    return TimeSeries(h, times, series, ("tau_r_norm", "tau_t_norm"), verdicts)


def energy_evolution(cfg, h=1.95, methods=("SP4", "RK4"), t_end=150.0, h_ref=0.005, use_cache=True):
    """Scaled energy ``H_n / H_0`` at every step for each method and the reference."""
    ref = reference_on_grid(cfg, h, t_end, h_ref, use_cache)
    n = len(ref.times)
    times = cfg.t_span[0] + np.arange(n) * h
    times[-1] = ref.times[-1]
    h0 = ref.hamiltonians[0]
    series = {"reference": (ref.hamiltonians / h0)[:, None]}
    verdicts = {"reference": ref.verdict.value}
    for m in methods:
        traj = cached_integrate(cfg, m, h, t_end, use_cache=use_cache)
        series[m] = (_aligned(traj, n)[0] / h0)[:, None]
        verdicts[m] = traj.verdict.value
    return TimeSeries(h, times, series, ("H_scaled",), verdicts)


def max_deviation(ts, label, against="reference"):
    """Sup-norm deviation of one series from another over the whole grid."""
    return float(np.nanmax(np.abs(ts.series[label] - ts.series[against])))
