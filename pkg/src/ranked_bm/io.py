"""Writers for CSV, JSON, binary dumps and run manifests.

CSV files are comma separated with a header row and LF line endings;
floats are written with 17 significant digits, which round-trips every
double and is independent of locale.
"""
from __future__ import annotations

import csv
import json
import platform
import struct
import sys
from pathlib import Path

import numpy as np

__all__ = [
    "fmt", "write_csv", "write_json", "write_binary", "read_binary",
    "trajectory_rows", "named_rows", "histogram_rows", "write_manifest",
]

_MAGIC = b"RBMDUMP1"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return str(v)
        return v
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_binary(path, array) -> Path:
    """Magic, ``uint32`` rank, ``uint64`` shape, then little-endian float64 data."""
    a = np.ascontiguousarray(array, dtype="<f8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes())
    return path


def read_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError("not a ranked_bm binary dump")
    (ndim,) = struct.unpack_from("<I", raw, 8)
    shape = struct.unpack_from(f"<{ndim}Q", raw, 12)
    offset = 12 + 8 * ndim
    return np.frombuffer(raw, dtype="<f8", offset=offset).reshape(shape).copy()


def trajectory_rows(traj, replica: int = 0):
    """Long format ``(replica, time, series, k, value)`` for a gap trajectory."""
    d = traj.Z.shape[1]
    for j, t in enumerate(traj.times):
        yield replica, t, "Y1", 1, traj.Y1[j]
        for k in range(d):
            yield replica, t, "Z", k + 1, traj.Z[j, k]
        for k in range(d):
            yield replica, t, "L", k + 1, traj.L[j, k]


def named_rows(traj, replica: int = 0):
    """Long format for a named trajectory: positions by particle, then the
    (1-based) particle holding each rank."""
    N = traj.X.shape[1]
    for j, t in enumerate(traj.times):
        for i in range(N):
            yield replica, t, "X", i + 1, traj.X[j, i]
        for k in range(N):
            yield replica, t, "rank_holder", k + 1, int(traj.perm[j, k]) + 1


def histogram_rows(samples, rates, bins: int = 40):
    """Plot-ready ``(series, x, y)``: empirical density and fitted exponential."""
    for k, (s, lam) in enumerate(zip(samples, rates), start=1):
        hi = float(np.quantile(s, 0.995)) if len(s) else 1.0
        dens, edges = np.histogram(s, bins=bins, range=(0.0, hi), density=True)
        mids = 0.5 * (edges[:-1] + edges[1:])
        for x, y in zip(mids, dens):
            yield f"empirical_{k}", x, y
        for x in mids:
            yield f"exponential_{k}", x, lam * np.exp(-lam * x)


def _versions() -> dict:
    import numba
    import scipy
    import yaml

    from . import __version__
    return {
        "ranked_bm": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "pyyaml": yaml.__version__,
        "platform": platform.platform(),
    }


def write_manifest(out_dir, *, command: str, config_hash: str, seed: int,
                   wall_time: float, outputs, extra: dict | None = None) -> Path:
    data = {
        "command": command,
        "config_sha256": config_hash,
        "seed": seed,
        "versions": _versions(),
        "wall_time_s": wall_time,
        "outputs": sorted(str(p) for p in outputs),
    }
    if extra:
        data.update(extra)
    return write_json(Path(out_dir) / "manifest.json", data)
