"""Discretized walking area: a uniform grid over the unit square.

Arrays are indexed ``[i, k]`` with ``i`` along x and ``k`` along y, so the
center of cell ``(i, k)`` is ``((i + 1/2) h, (k + 1/2) h)``.

Targets and inlets are runs of faces on the outer boundary. The cells
behind those faces are labelled ``TARGET`` / ``INLET`` but stay walkable;
mass is absorbed when it crosses an open (target or inlet) face.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DisconnectedDomain, OutOfBounds, OverlapConflict

SIDES = ("left", "right", "bottom", "top")

# relative slack for the cell-center membership tests (ties are included)
_TIE_EPS = 1e-12


class CellKind(enum.IntEnum):
    FREE = 0
    OBSTACLE = 1
    TARGET = 2
    INLET = 3


@dataclass(frozen=True)
class Rect:
    """Half-open block of cell indices ``[i0, i1) x [k0, k1)``."""

    i0: int
    i1: int
    k0: int
    k1: int

    def cells(self):
        return (slice(self.i0, self.i1), slice(self.k0, self.k1))

    def mirrored(self, m: int) -> "Rect":
        return Rect(m - self.i1, m - self.i0, self.k0, self.k1)


@dataclass(frozen=True)
class BoundaryRun:
    """Faces ``start..stop-1`` along one side of the unit square.

    ``ident`` is the target id for target runs and the population id for
    inlet runs. Positions count along x for bottom/top and along y for
    left/right.
    """

    side: str
    start: int
    stop: int
    ident: int = 0

    def boundary_cells(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.start, self.stop)
        fixed = np.full_like(idx, 0 if self.side in ("left", "bottom") else m - 1)
        if self.side in ("left", "right"):
            return fixed, idx
        return idx, fixed


@dataclass(frozen=True)
class Obstacle:
    ident: int
    rect: Rect


@dataclass(frozen=True)
class NeighborhoodSpec:
    radius: float
    theta_max: float = math.pi / 2
    anisotropic: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("neighborhood radius must be positive")
        if not 0 < self.theta_max <= math.pi / 2 + 1e-15:
            raise ValueError("theta_max must lie in (0, pi/2]")

    @property
    def cos_theta(self) -> float:
        # cos(pi/2) is 6e-17 in floating point; the half-ball needs an exact 0
        if abs(self.theta_max - math.pi / 2) < 1e-15:
            return 0.0
        return math.cos(self.theta_max)


@dataclass(frozen=True, eq=False)
class Grid:
    m: int
    kind: np.ndarray
    label: np.ndarray
    face_target: dict[str, np.ndarray]
    face_inlet: dict[str, np.ndarray]
    obstacles: tuple[Obstacle, ...] = field(default=())

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def walkable(self) -> np.ndarray:
        return self.kind != CellKind.OBSTACLE

    @property
    def obstacle(self) -> np.ndarray:
        return self.kind == CellKind.OBSTACLE

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.m) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def open_face(self, side: str) -> np.ndarray:
        """Faces on ``side`` that let mass leave the domain."""
        return (self.face_target[side] >= 0) | (self.face_inlet[side] >= 0)

    def target_ids(self) -> list[int]:
        ids = set()
        for side in SIDES:
            ids.update(int(t) for t in self.face_target[side] if t >= 0)
        return sorted(ids)

    def kind_counts(self) -> dict[CellKind, int]:
        return {k: int(np.count_nonzero(self.kind == k)) for k in CellKind}


def build_grid(
    m: int,
    obstacles=(),
    targets=(),
    inlets=(),
    check_connectivity: bool = True,
) -> Grid:
    """Build a grid and label its cells.

    ``obstacles`` holds :class:`Obstacle` (or bare :class:`Rect`, numbered in
    order), ``targets`` and ``inlets`` hold :class:`BoundaryRun`.
    """
    if not isinstance(m, (int, np.integer)) or m < 4:
        raise ValueError(f"grid needs m >= 4 cells per side, got {m!r}")
    m = int(m)
    kind = np.full((m, m), CellKind.FREE, dtype=np.int8)
    label = np.full((m, m), -1, dtype=np.int32)
    obs_list = []
    for n, ob in enumerate(obstacles):
        if isinstance(ob, Rect):
            ob = Obstacle(n, ob)
        r = ob.rect
        if not (0 <= r.i0 < r.i1 <= m and 0 <= r.k0 < r.k1 <= m):
            raise OutOfBounds(f"obstacle {ob.ident} rectangle {r} outside 0..{m}")
        block = kind[r.cells()]
        if np.any(block == CellKind.OBSTACLE):
            other = int(label[r.cells()][block == CellKind.OBSTACLE][0])
            raise OverlapConflict(f"obstacle {ob.ident} overlaps obstacle {other}")
        kind[r.cells()] = CellKind.OBSTACLE
        label[r.cells()] = ob.ident
        obs_list.append(ob)

    face_target = {s: np.full(m, -1, dtype=np.int32) for s in SIDES}
    face_inlet = {s: np.full(m, -1, dtype=np.int32) for s in SIDES}
    for what, runs, faces in (("target", targets, face_target), ("inlet", inlets, face_inlet)):
        for run in runs:
            if run.side not in SIDES:
                raise ValueError(f"unknown side {run.side!r} for {what} {run.ident}")
            if not 0 <= run.start < run.stop <= m:
                raise OutOfBounds(f"{what} {run.ident} run {run.start}..{run.stop} outside 0..{m}")
            seg = faces[run.side][run.start:run.stop]
            if np.any(seg >= 0):
                raise OverlapConflict(
                    f"{what} {run.ident} overlaps {what} {int(seg[seg >= 0][0])} on {run.side} side"
                )
            ci, ck = run.boundary_cells(m)
            hit = kind[ci, ck] == CellKind.OBSTACLE
            if np.any(hit):
                raise OverlapConflict(
                    f"{what} {run.ident} overlaps obstacle {int(label[ci, ck][hit][0])}"
                )
            seg[:] = run.ident

    # inlet labels win over target labels on shared boundary cells
    for side in SIDES:
        ci, ck = BoundaryRun(side, 0, m).boundary_cells(m)
        t = face_target[side]
        sel = t >= 0
        kind[ci[sel], ck[sel]] = CellKind.TARGET
        label[ci[sel], ck[sel]] = t[sel]
    for side in SIDES:
        ci, ck = BoundaryRun(side, 0, m).boundary_cells(m)
        p = face_inlet[side]
        sel = p >= 0
        kind[ci[sel], ck[sel]] = CellKind.INLET
        label[ci[sel], ck[sel]] = p[sel]

    for a in (kind, label, *face_target.values(), *face_inlet.values()):
        a.flags.writeable = False
    grid = Grid(m, kind, label, face_target, face_inlet, tuple(obs_list))

    if not grid.walkable.any():
        raise DisconnectedDomain("no walkable cell left")
    if check_connectivity and grid.target_ids():
        bad = unreachable(grid, grid.kind == CellKind.INLET)
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise DisconnectedDomain(f"inlet cell ({i}, {k}) has no walkable path to a target")
    return grid


def unreachable(grid: Grid, cells: np.ndarray, target_ids=None) -> np.ndarray:
    """Cells of ``cells`` whose 4-connected walkable component touches no target."""
    comp, _ = ndimage.label(grid.walkable)
    goal = grid.kind == CellKind.TARGET
    if target_ids is not None:
        goal &= np.isin(grid.label, list(target_ids))
        # inlet cells can sit behind target faces too
        for side in SIDES:
            ci, ck = BoundaryRun(side, 0, grid.m).boundary_cells(grid.m)
            sel = np.isin(grid.face_target[side], list(target_ids))
            goal[ci[sel], ck[sel]] = True
    else:
        for side in SIDES:
            ci, ck = BoundaryRun(side, 0, grid.m).boundary_cells(grid.m)
            sel = grid.face_target[side] >= 0
            goal[ci[sel], ck[sel]] = True
    good = np.unique(comp[goal & grid.walkable])
    good = good[good > 0]
    return cells & grid.walkable & ~np.isin(comp, good) | (cells & ~grid.walkable)


def ball_offsets(h: float, radius: float) -> np.ndarray:
    """Integer offsets ``(dx, dy)`` with ``0 < |(dx, dy)| h <= radius``.

    Ordered by ``(|dx|, dy, dx)`` so that ``(-a, dy)`` and ``(a, dy)`` are
    adjacent; the interaction sums rely on this pairing.
    """
    r = radius / h
    n = int(math.floor(r)) + 1
    d = np.arange(-n, n + 1)
    dx, dy = np.meshgrid(d, d, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    keep = (dx * dx + dy * dy <= r * r * (1 + _TIE_EPS)) & ((dx != 0) | (dy != 0))
    dx, dy = dx[keep], dy[keep]
    order = np.lexsort((dx, dy, np.abs(dx)))
    return np.stack([dx[order], dy[order]], axis=1)


def visible(offsets: np.ndarray, direction, spec: NeighborhoodSpec) -> np.ndarray:
    """Membership of each offset in the visibility sector along ``direction``.

    ``direction`` may be a single 2-vector or per-cell arrays ``(dx, dy)`` of
    any shape; the result then broadcasts to ``(n_offsets, *shape)``.
    """
    if not spec.anisotropic:
        return np.ones(len(offsets), dtype=bool)
    ox = offsets[:, 0].astype(float)
    oy = offsets[:, 1].astype(float)
    dist = np.hypot(ox, oy)
    d0 = np.asarray(direction[0], dtype=float)
    d1 = np.asarray(direction[1], dtype=float)
    extra = (slice(None),) + (None,) * d0.ndim
    dot = ox[extra] * d0 + oy[extra] * d1
    return dot >= dist[extra] * (spec.cos_theta - _TIE_EPS)


def neighborhood_cells(grid: Grid, center, direction, spec: NeighborhoodSpec):
    """Cells seen from ``center``, each with its quadrature weight ``h**2``.

    Indices outside ``0..m-1`` denote exterior ghost cells.
    """
    i, k = center
    if not (0 <= i < grid.m and 0 <= k < grid.m):
        raise OutOfBounds(f"center {center} outside the grid")
    if grid.kind[i, k] == CellKind.OBSTACLE:
        raise ValueError(f"center {center} is an obstacle cell")
    if spec.anisotropic and abs(math.hypot(*direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    offs = ball_offsets(grid.h, spec.radius)
    if len(offs) == 0:
        return []
    offs = offs[visible(offs, direction, spec)]
    w = grid.h * grid.h
    return [((int(i + dx), int(k + dy)), w) for dx, dy in offs]
