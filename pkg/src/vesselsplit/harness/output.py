"""Deterministic CSV writers.

Numbers are written with 17 significant digits (round-trip exact) in a
locale-independent format; metadata goes into ``#``-prefixed rows at the top
and verdicts or failure notes into ``#`` rows at the bottom.
"""

import csv
import io
from pathlib import Path

import numpy as np

from .experiments import COMPONENTS, euler_angles

TRAJECTORY_HEADER = (
    ["t", "omega1", "omega2", "omega3", "q0", "q1", "q2", "q3", "v1", "v2", "v3", "x1", "x2", "x3",
     "phi_theta1", "phi_theta2", "phi_theta3", "phi_x1", "phi_x2", "phi_x3",
     "H", "tau_r_norm", "tau_t_norm", "theta_phi", "theta_theta", "theta_psi"])


def fmt(x):
    """17 significant digits; ``nan``/``inf`` spelled out; strings passed through."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path, header, rows, meta=None, footer=None):
    """Write ``rows`` under ``header``; ``meta`` and ``footer`` become ``# key: value`` lines."""
    buf = io.StringIO()
    for key, val in (meta or {}).items():
        buf.write(f"# {key}: {val}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    for line in footer or ():
        buf.write(f"# {line}\n")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """``(header, rows)`` of a file written by :func:`write_csv` (comment rows skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def trajectory_rows(traj):
    ang = euler_angles(traj.states) if len(traj.times) else np.zeros((0, 3))
    data = np.column_stack([traj.times, traj.states, traj.hamiltonians, traj.control_norms, ang])
    return data.tolist()


def write_trajectory(path, traj, meta=None):
    footer = [f"verdict: {traj.verdict.value}"]
    if traj.message:
        footer.append(traj.message)
    return write_csv(path, TRAJECTORY_HEADER, trajectory_rows(traj), meta, footer)


def write_order_study(out_dir, study, meta=None):
    out_dir = Path(out_dir)
    rows = [[r["method"], comp, r["h"], r[comp], r["verdict"]] for r in study.rows for comp in COMPONENTS]
    p1 = write_csv(out_dir / "order_study.csv", ["method", "component", "h", "error", "verdict"], rows, meta)
    slopes = [[m, comp, s, n] for (m, comp), (s, n) in sorted(study.slopes.items())]
    p2 = write_csv(out_dir / "order_slopes.csv", ["method", "component", "slope", "n_points"], slopes, meta)
    return p1, p2


def write_error_table(out_dir, table, stem, meta=None):
    """Long form (``<stem>.csv``) plus the wide h-by-method layout (``<stem>_wide.csv``)."""
    out_dir = Path(out_dir)
    meta = dict(meta or {})
    meta.update(t_end=fmt(table.t_end), reference_h=fmt(table.h_ref))
    rows = [[r["method"], r["h"], r["verdict"], r["error"]] for r in table.rows]
    notes = [r["note"] for r in table.rows if r.get("note")]
    p1 = write_csv(out_dir / f"{stem}.csv", ["method", "h", "verdict", table.kind], rows, meta, notes)
    p2 = write_csv(out_dir / f"{stem}_wide.csv", ["h", *table.methods], table.wide(), meta)
    return p1, p2


def write_time_series(path, ts, meta=None):
    labels = list(ts.series)
    header = ["t"] + [f"{lab}_{col}" for lab in labels for col in ts.columns]
    data = np.column_stack([ts.times] + [ts.series[lab] for lab in labels])
    footer = [f"verdict {lab}: {v}" for lab, v in ts.verdicts.items()]
    return write_csv(path, header, data.tolist(), meta, footer)


def format_table(table):
    """Plain-text rendering of an error table for the terminal."""
    head = ["h".rjust(6)] + [m.rjust(10) for m in table.methods]
    lines = [" ".join(head)]
    for line in table.wide():
        cells = [f"{line[0]:6.3f}"] + [(f"{v:10.2e}" if not isinstance(v, str) else v.rjust(10)) for v in line[1:]]
        lines.append(" ".join(cells))
    return "\n".join(lines)
