"""
Deterministic flat-file artifacts: CSV tables at 12 significant digits and
JSON state-space exports, all written atomically.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import FreqResponse, SweepResult, TimeResponse
from .errors import ConfigurationError
from .ports import PortSystem


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_json(path, data) -> Path:
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")


# -- tables -----------------------------------------------------------------------

def bode_csv(resp: FreqResponse) -> str:
    header = ["omega_rad_s", "output", "input", "re", "im", "mag_db", "phase_deg", "skipped"]
    mag, ph = resp.magnitude_db, resp.phase_deg
    rows = []
    for j, (y, u) in enumerate(resp.pairs):
        for k, w in enumerate(resp.omega):
            s = resp.samples[k, j]
            rows.append((w, y, u, s.real, s.imag, mag[k, j], ph[k, j], str(int(resp.skipped[k]))))
    return csv_text(header, rows)


def locus_csv(res: SweepResult) -> str:
    header = ["gain", "pole_re", "pole_im", "branch_id"]
    rows = []
    for k, K in enumerate(res.gains):
        for b, p in enumerate(res.poles[k]):
            rows.append((K, p.real, p.imag, str(b)))
    return csv_text(header, rows)


def sim_csv(resp: TimeResponse, every: int = 1) -> str:
    header = ["t"] + list(resp.inputs) + list(resp.outputs)
    data = np.hstack([resp.t[:, None], resp.u, resp.y])[::every]
    return csv_text(header, data)


# -- state-space export -----------------------------------------------------------

def ss_to_dict(system: PortSystem, extra: dict | None = None) -> dict:
    d = {
        "inputs": list(system.inputs),
        "outputs": list(system.outputs),
        "states": list(system.states),
        "A": system.A.tolist(),
        "B": system.B.tolist(),
        "C": system.C.tolist(),
        "D": system.D.tolist(),
    }
    if extra:
        d.update(extra)
    return d


def ss_from_dict(d: dict) -> PortSystem:
    try:
        nx, nu, ny = len(d["states"]), len(d["inputs"]), len(d["outputs"])
        arr = {k: np.asarray(d[k], float) for k in "ABCD"}
        shapes = {"A": (nx, nx), "B": (nx, nu), "C": (ny, nx), "D": (ny, nu)}
        arr = {k: a.reshape(shapes[k]) for k, a in arr.items()}
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"malformed state-space export: {exc}") from None
    return PortSystem(arr["A"], arr["B"], arr["C"], arr["D"],
                      tuple(d["inputs"]), tuple(d["outputs"]), tuple(d["states"]))


def load_ss(path) -> PortSystem:
    return ss_from_dict(json.loads(Path(path).read_text()))


def matrix_csv(M: np.ndarray, rows: Sequence[str], cols: Sequence[str]) -> str:
    return csv_text(["label"] + list(cols), ([r] + [fmt(v) for v in M[i]] for i, r in enumerate(rows)))
