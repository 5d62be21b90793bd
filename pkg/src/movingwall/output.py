"""CSV tables, 16-bit PGM heatmaps and JSON run manifests."""
from __future__ import annotations

import json
import math
import os
import platform
from typing import Dict, Sequence

import numpy as np

from . import __version__

FLOAT_FORMAT = "%.17g"


def write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    """Write equal-length columns with full double precision.

    Formatting goes through ``%``-style conversion, which ignores the locale,
    so the decimal separator is always ``.``.
    """
    cols = [np.asarray(c) for c in columns]
    if len(header) != len(cols):
        raise ValueError("header and column count differ")
    n = {c.shape[0] for c in cols}
    if len(n) > 1:
        raise ValueError("columns have different lengths")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FORMAT % float(x)


def read_csv(path):
    """Header and float matrix of a file written by :func:`write_csv`."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_pgm(path, values: np.ndarray) -> None:
    """16-bit binary PGM (P5), rows = time, columns = space.

    Values are scaled linearly so the global maximum maps to 65535; samples
    are big-endian as the format requires.
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError("heatmap must be 2-D")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ValueError("heatmap values must be finite and non-negative")
    peak = a.max()
    scaled = np.zeros(a.shape) if peak == 0 else a / peak * 65535.0
    pix = np.rint(scaled).astype(">u2")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    """Pixel array of a 16-bit P5 file written by :func:`write_pgm`."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5" or maxval != 65535:
        raise ValueError("not a 16-bit binary PGM")
    return np.frombuffer(data[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_manifest(path, command: str, config_text: str, duration: float,
                   stats: Dict, norm_drift: float, outputs: Sequence[str], extra: Dict = None) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config_text,
        "wall_clock_seconds": duration,
        "integrator": stats,
        "max_norm_drift": norm_drift,
        "outputs": [os.path.basename(p) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
