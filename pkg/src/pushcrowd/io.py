"""Snapshot and metrics writers.

Snapshots are plain-text matrices with row 0 at the top of the domain
(y = 1), so a snapshot reads like the picture of the density.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

METRICS_HEADER = (
    "step", "time", "pop", "mass", "mass_exited_cum", "mass_injected_cum",
    "max_density", "cfl_ratio", "guarded_cells",
)
TRUNCATION_MARKER = "# TRUNCATED"


def to_image_rows(field: np.ndarray) -> np.ndarray:
    """``[i, k]`` field to display order: rows top to bottom, columns left to right."""
    return np.asarray(field).T[::-1]


def from_image_rows(rows: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(rows)[::-1].T)


def write_matrix(field: np.ndarray, path) -> Path:
    path = Path(path)
    np.savetxt(path, to_image_rows(field), fmt="%.17g", delimiter=" ")
    return path


def read_matrix(path) -> np.ndarray:
    return from_image_rows(np.loadtxt(path, ndmin=2))


def write_pgm(field: np.ndarray, path) -> Path:
    """Binary 8-bit graymap, linear from 0 to the field maximum."""
    path = Path(path)
    rows = to_image_rows(field)
    top = float(rows.max()) if rows.size else 0.0
    if top > 0:
        img = np.clip(np.round(rows / top * 255.0), 0, 255).astype(np.uint8)
    else:
        img = np.zeros(rows.shape, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Pixels of a P5 graymap in display order."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos].decode("ascii"))
    if fields[0] != "P5":
        raise ValueError(f"{path}: not a binary graymap")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)


def snapshot_name(pop_id: int, step: int) -> str:
    return f"pop{pop_id}_step{step:06d}"


def write_snapshot(state, pop: int, directory, pop_id: int | None = None, images: bool = False) -> Path:
    """Write population ``pop`` of ``state``; returns the matrix path."""
    directory = Path(directory)
    name = snapshot_name(pop if pop_id is None else pop_id, state.step)
    path = write_matrix(state.densities[pop], directory / f"{name}.txt")
    if images:
        write_pgm(state.densities[pop], directory / f"{name}.pgm")
    return path


def read_snapshot(path) -> np.ndarray:
    return read_matrix(path)


def write_fields(state, directory) -> list[Path]:
    """Debug export of each population's potential and desired velocity."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for n, (pot, vd) in enumerate(zip(state.potentials, state.desired)):
        out.append(write_matrix(pot.u, directory / f"pop{n}_potential.txt"))
        out.append(write_matrix(vd.v[0], directory / f"pop{n}_vd_x.txt"))
        out.append(write_matrix(vd.v[1], directory / f"pop{n}_vd_y.txt"))
    return out


def metrics_rows(state, reports, pop_ids):
    for n, (rep, pid) in enumerate(zip(reports, pop_ids)):
        yield [
            state.step, repr(state.time), pid, repr(state.mass(n)), repr(state.exited[n]),
            repr(state.injected[n]), repr(rep.max_density), repr(rep.cfl_ratio), rep.guarded_cells,
        ]


class MetricsWriter:
    """Streams one CSV row per population per step."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(METRICS_HEADER)

    def write_step(self, state, reports, pop_ids):
        for row in metrics_rows(state, reports, pop_ids):
            self._csv.writerow(row)
        self._fh.flush()

    def truncate(self, step: int, reason: str):
        self._fh.write(f"{TRUNCATION_MARKER} at step {step}: {reason}\n")
        self._fh.flush()

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_metrics(steps, path) -> Path:
    """Write ``[(state, reports, pop_ids), ...]`` as a metrics file."""
    with MetricsWriter(path) as w:
        for state, reports, pop_ids in steps:
            w.write_step(state, reports, pop_ids)
    return Path(path)


def read_metrics(path):
    """Rows as dicts plus the truncation line (``None`` if the run completed)."""
    rows, marker = [], None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith(TRUNCATION_MARKER):
            marker = line
        else:
            body.append(line)
    for rec in csv.DictReader(body):
        rows.append({
            k: (int(v) if k in ("step", "pop", "guarded_cells") else float(v)) for k, v in rec.items()
        })
    return rows, marker
