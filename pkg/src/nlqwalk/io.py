"""File formats: CSV series and grids, JSON results and run manifests.

Floats in CSV are written with 17 significant digits so that parsing them
back gives the same doubles.  Every write goes to a temporary file in the
target directory and is renamed into place.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .observables import TrajectoryRecord
from .regimes import PhaseDiagramGrid, RegimeDiagnostics, ThresholdCurve

MANIFEST_COMMANDS = ("evolve", "scan-chi", "threshold-curve", "scaling", "phase-diagram")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


FILE_MODE = 0o666 & ~_umask()


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        kwargs = {} if mode == "wb" else {"encoding": "utf-8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, FILE_MODE)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def check_writable(path) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise OSError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory is not writable: {parent}")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, _csv_text(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ------------------------------------------------------------------ records

SERIES_HEADER = ["t", "coherence", "participation"]


def serialize_record(record: TrajectoryRecord, path, density_path=None) -> list[Path]:
    """Series CSV (t, coherence, participation) plus an optional wide density CSV."""
    rows = ((t, c, p) for t, (c, p) in enumerate(zip(record.coherence, record.participation)))
    out = [write_csv(path, SERIES_HEADER, rows)]
    if density_path is not None and record.density_snapshots:
        times, dens = record.density_matrix()
        header = ["t"] + [f"p_{n}" for n in range(1, record.config.n_sites + 1)]
        out.append(write_csv(density_path, header, ([t, *row] for t, row in zip(times, dens))))
    return out


def parse_record(path) -> dict[str, np.ndarray]:
    header, rows = read_csv(path)
    if header != SERIES_HEADER:
        raise ValueError(f"unexpected series header {header}")
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return {"t": arr[:, 0].astype(np.int64), "coherence": arr[:, 1], "participation": arr[:, 2]}


def parse_density(path) -> tuple[np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return arr[:, 0].astype(np.int64), arr[:, 1:]


# ------------------------------------------------------------------ grids

DIAG_FIELDS = ["mean_coherence_frac", "min_coherence_frac", "peak_power_fraction", "mean_pr_frac"]
GRID_HEADER = ["chi_index", "theta_index", "chi", "theta", "theta_pi", "seed",
               "mean_coherence", "label", *DIAG_FIELDS, "error"]


def _grid_rows(grid: PhaseDiagramGrid):
    for i, chi in enumerate(grid.chi_axis):
        for j, theta in enumerate(grid.theta_axis):
            d = grid.diagnostics[i, j]
            label = grid.labels[i, j]
            diag = [getattr(d, f) for f in DIAG_FIELDS] if isinstance(d, RegimeDiagnostics) \
                else [None] * len(DIAG_FIELDS)
            yield [i, j, chi, theta, theta / math.pi, int(grid.seeds[i, j, 0]),
                   grid.mean_coherence[i, j], "" if label is None else label.value,
                   *diag, grid.errors.get((i, j), "")]


def grid_to_dict(grid: PhaseDiagramGrid) -> dict:
    def num(x):
        return None if not np.isfinite(x) else float(x)

    return {
        "chi_axis": [float(x) for x in grid.chi_axis],
        "theta_axis": [float(x) for x in grid.theta_axis],
        "theta_axis_pi": [float(x / math.pi) for x in grid.theta_axis],
        "template": grid.config.to_dict(),
        "thresholds": grid.thresholds.to_dict(),
        "labels": grid.label_names(),
        "mean_coherence": [[num(x) for x in row] for row in grid.mean_coherence],
        "seeds": grid.seeds.astype(np.uint64).tolist(),
        "errors": [{"chi_index": i, "theta_index": j, "error": e}
                   for (i, j), e in sorted(grid.errors.items())],
    }


def serialize_grid(grid: PhaseDiagramGrid, csv_path, json_path) -> list[Path]:
    return [write_csv(csv_path, GRID_HEADER, _grid_rows(grid)),
            write_json(json_path, grid_to_dict(grid))]


def parse_grid_csv(path) -> dict:
    """Grid CSV back into axes, mean coherence and labels (2-D arrays)."""
    header, rows = read_csv(path)
    if header != GRID_HEADER:
        raise ValueError(f"unexpected grid header {header}")
    ni = max(int(r[0]) for r in rows) + 1
    nj = max(int(r[1]) for r in rows) + 1
    chi = np.empty(ni)
    theta = np.empty(nj)
    mean = np.empty((ni, nj))
    labels = np.empty((ni, nj), dtype=object)
    seeds = np.empty((ni, nj), dtype=np.uint64)
    for r in rows:
        i, j = int(r[0]), int(r[1])
        chi[i], theta[j] = float(r[2]), float(r[3])
        seeds[i, j] = int(r[5])
        mean[i, j] = float(r[6])
        labels[i, j] = r[7] or None
    return {"chi_axis": chi, "theta_axis": theta, "mean_coherence": mean,
            "labels": labels, "seeds": seeds}


def serialize_curve(curve: ThresholdCurve, csv_path, json_path, extra: dict | None = None):
    rows = ([t, t / math.pi, c, s] for t, c, s in zip(curve.theta_grid, curve.chi_sd, curve.status))
    data = curve.to_dict()
    if extra:
        data.update(extra)
    return [write_csv(csv_path, ["theta", "theta_pi", "chi_sd", "status"], rows),
            write_json(json_path, data)]


# ------------------------------------------------------------------ manifest

def make_manifest(command: str, config: dict, outputs: dict, argv=None,
                  thresholds: dict | None = None, extra: dict | None = None,
                  started: float | None = None, finished: float | None = None) -> dict:
    if command not in MANIFEST_COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    m = {
        "command": command,
        "tool": "nlqwalk",
        "version": __version__,
        "config": config,
        "thresholds": thresholds,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "argv": list(argv) if argv is not None else None,
    }
    if extra:
        m.update(extra)
    # wall-clock fields; excluded from reproducibility comparisons
    m["created_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    if started is not None and finished is not None:
        m["elapsed_s"] = finished - started
    return m
