"""Harmonic navigation potential and the desired-velocity field derived from it.

Vector fields throughout the package are arrays of shape ``(2, m, m)``:
``v[0]`` is the x component and ``v[1]`` the y component.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SIDES, BoundaryRun, CellKind, Grid

log = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

# neighbor directions: west, east, south, north
_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))
_SIDE_OF_DIR = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BoundaryConditionSet:
    """Boundary data for one population's potential.

    ``targets`` selects the target ids this population walks to (``None``
    means every target). Faces of other targets fall back to the wall rule
    of their side. ``obstacles`` maps obstacle id to ``"dirichlet"`` or
    ``"neumann"``; unlisted obstacles are Dirichlet at ``wall_value``.
    """

    wall_value: float = 0.0
    target_value: float = 1.0
    wall_sides: dict = field(default_factory=dict)
    obstacles: dict = field(default_factory=dict)
    inlet_bc: str = NEUMANN
    targets: tuple | None = None

    def __post_init__(self):
        if not self.target_value > self.wall_value:
            raise ValueError("target value must exceed the wall value")
        for side, bc in self.wall_sides.items():
            if side not in SIDES or bc not in (DIRICHLET, NEUMANN):
                raise ValueError(f"bad wall condition {side}={bc}")
        for bc in self.obstacles.values():
            if bc not in (DIRICHLET, NEUMANN):
                raise ValueError(f"bad obstacle condition {bc!r}")
        if self.inlet_bc not in (DIRICHLET, NEUMANN):
            raise ValueError(f"bad inlet condition {self.inlet_bc!r}")

    def is_own_target(self, tid: int) -> bool:
        return tid >= 0 and (self.targets is None or tid in self.targets)


@dataclass(frozen=True)
class FaceConditions:
    """Per-cell, per-direction face data of a walkable cell.

    ``cell[d]`` marks a walkable neighbor, ``dirichlet[d]`` a Dirichlet face
    with value ``value[d]``. Anything else is a zero-flux face.
    """

    cell: np.ndarray  # (4, m, m) bool
    dirichlet: np.ndarray  # (4, m, m) bool
    value: np.ndarray  # (4, m, m) float, 0 where not Dirichlet


def face_conditions(grid: Grid, bcs: BoundaryConditionSet) -> FaceConditions:
    m = grid.m
    walk = grid.walkable
    cell = np.zeros((4, m, m), dtype=bool)
    dirichlet = np.zeros((4, m, m), dtype=bool)
    value = np.zeros((4, m, m))

    obst_dirichlet = np.zeros((m, m), dtype=bool)
    for ob in grid.obstacles:
        if bcs.obstacles.get(ob.ident, DIRICHLET) == DIRICHLET:
            obst_dirichlet[ob.rect.cells()] = True

    for d, (di, dk) in enumerate(_DIRS):
        # neighbor of (i, k) is (i + di, k + dk); shift walkable masks accordingly
        nb_walk = np.zeros((m, m), dtype=bool)
        nb_obst_d = np.zeros((m, m), dtype=bool)
        src = (slice(max(di, 0), m + min(di, 0)), slice(max(dk, 0), m + min(dk, 0)))
        dst = (slice(max(-di, 0), m + min(-di, 0)), slice(max(-dk, 0), m + min(-dk, 0)))
        nb_walk[dst] = walk[src]
        nb_obst_d[dst] = obst_dirichlet[src]
        cell[d] = walk & nb_walk
        dirichlet[d] = walk & nb_obst_d
        value[d][dirichlet[d]] = bcs.wall_value

        side = _SIDE_OF_DIR[d]
        ci, ck = BoundaryRun(side, 0, m).boundary_cells(m)
        tgt = grid.face_target[side]
        inl = grid.face_inlet[side]
        wall_bc = bcs.wall_sides.get(side, DIRICHLET)
        for n in range(m):
            i, k = ci[n], ck[n]
            if not walk[i, k]:
                continue
            if bcs.is_own_target(int(tgt[n])):
                dirichlet[d, i, k] = True
                value[d, i, k] = bcs.target_value
            elif inl[n] >= 0:
                dirichlet[d, i, k] = bcs.inlet_bc == DIRICHLET
                value[d, i, k] = bcs.wall_value if dirichlet[d, i, k] else 0.0
            else:
                dirichlet[d, i, k] = wall_bc == DIRICHLET
                value[d, i, k] = bcs.wall_value if dirichlet[d, i, k] else 0.0
    return FaceConditions(cell, dirichlet, value)


@dataclass(frozen=True, eq=False)
class PotentialField:
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool
    no_target: bool
    faces: FaceConditions
    bcs: BoundaryConditionSet


def _neighbor_values(u: np.ndarray) -> tuple[np.ndarray, ...]:
    p = np.pad(u, 1)
    return p[:-2, 1:-1], p[2:, 1:-1], p[1:-1, :-2], p[1:-1, 2:]


def solve_laplace(
    grid: Grid,
    bcs: BoundaryConditionSet,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> PotentialField:
    """Five-point Laplace solve by red-black SOR.

    Dirichlet faces enter through the ghost value ``2 u_bc - u_cell``, zero-flux
    faces through the mirror ghost ``u_cell``. The residual is the max-norm of
    ``b - A u`` for the unscaled stencil over walkable cells. The iterate with
    the smallest residual seen is returned, so a larger ``max_iter`` never
    yields a worse residual.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = grid.m
    if max_iter is None:
        max_iter = 200 * m * m
    faces = face_conditions(grid, bcs)
    walk = grid.walkable

    dvals = faces.value[faces.dirichlet]
    if dvals.size == 0 or np.all(dvals == bcs.wall_value):
        log.warning("potential has no target face above the wall value; u is constant")
        u = np.where(walk, bcs.wall_value, 0.0)
        return PotentialField(u, 0.0, 0, True, True, faces, bcs)

    ncell = faces.cell.sum(axis=0)
    ndir = faces.dirichlet.sum(axis=0)
    diag = (ncell + 2 * ndir).astype(float)
    diag[diag == 0] = 1.0
    dv = faces.value
    dsum = 2.0 * ((dv[0] + dv[1]) + (dv[2] + dv[3]))

    red = walk & ((np.add.outer(np.arange(m), np.arange(m)) % 2) == 0)
    black = walk & ~red
    omega = 2.0 / (1.0 + math.sin(math.pi / m))

    def gauss_seidel_target(u):
        w, e, s, n = _neighbor_values(u)
        return ((w + e) + (s + n) + dsum) / diag

    u = np.where(walk, bcs.wall_value, 0.0)
    best_res, best_u, it = math.inf, u.copy(), 0
    for it in range(max_iter + 1):
        gs = gauss_seidel_target(u)
        res = float(np.max((diag * np.abs(gs - u))[walk]))
        if res < best_res:
            best_res, best_u = res, u.copy()
        if res <= tol or it == max_iter:
            break
        u[red] += omega * (gs - u)[red]
        gs = gauss_seidel_target(u)
        u[black] += omega * (gs - u)[black]
    converged = best_res <= tol
    if not converged:
        log.warning("Laplace solve stopped at residual %.3g > tol %.3g", best_res, tol)
    best_u.flags.writeable = False
    return PotentialField(best_u, best_res, it, converged, False, faces, bcs)


@dataclass(frozen=True, eq=False)
class DesiredVelocityField:
    v: np.ndarray  # (2, m, m)
    alpha: float
    degenerate_mask: np.ndarray
    unrepaired_mask: np.ndarray
    lipschitz: float

    @property
    def direction(self) -> np.ndarray:
        """Unit direction per cell, zero where the velocity vanishes."""
        norm = np.hypot(self.v[0], self.v[1])
        out = np.zeros_like(self.v)
        nz = norm > 0
        out[:, nz] = self.v[:, nz] / norm[nz]
        return out

    @property
    def all_degenerate(self) -> bool:
        return not np.any(~self.degenerate_mask & np.any(self.v != 0, axis=0))


def potential_gradient(field: PotentialField, grid: Grid) -> np.ndarray:
    """Cell-centered gradient of ``u``.

    Central differences between walkable neighbors; at a Dirichlet face the
    face value half a cell away is used, and a zero-flux face is skipped,
    which makes the difference one-sided there.
    """
    u = field.u
    h = grid.h
    f = field.faces
    nbv = _neighbor_values(u)
    cand = np.zeros((4, grid.m, grid.m))
    have = f.cell | f.dirichlet
    for d in range(4):
        sign = -1.0 if d in (0, 2) else 1.0
        from_cell = sign * (nbv[d] - u) / h
        from_face = sign * (f.value[d] - u) / (0.5 * h)
        cand[d] = np.where(f.cell[d], from_cell, np.where(f.dirichlet[d], from_face, 0.0))
    grad = np.zeros((2, grid.m, grid.m))
    for axis, (a, b) in enumerate(((0, 1), (2, 3))):
        both = have[a] & have[b]
        grad[axis] = np.where(both, (cand[a] + cand[b]) / 2, cand[a] + cand[b])
    grad[:, ~grid.walkable] = 0.0
    return grad


def desired_velocity(
    field: PotentialField,
    grid: Grid,
    alpha: float = 1.0,
    grad_eps: float | None = None,
) -> DesiredVelocityField:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if grad_eps is None:
        grad_eps = 1e-6 * alpha * grid.m
    if not grad_eps > 0:
        raise ValueError("grad_eps must be positive")
    walk = grid.walkable
    g = potential_gradient(field, grid)
    norm = np.hypot(g[0], g[1])
    ok = walk & (norm >= grad_eps)
    degenerate = walk & ~ok

    unit = np.zeros_like(g)
    unit[:, ok] = g[:, ok] / norm[ok]
    v = alpha * unit

    unrepaired = np.zeros_like(degenerate)
    if degenerate.any():
        nb = [np.stack(_neighbor_values(unit[c])) for c in (0, 1)]
        nb_ok = np.stack(_neighbor_values(ok.astype(float))) > 0
        sx = np.where(nb_ok, nb[0], 0.0)
        sy = np.where(nb_ok, nb[1], 0.0)
        ax = (sx[0] + sx[1]) + (sx[2] + sx[3])
        ay = (sy[0] + sy[1]) + (sy[2] + sy[3])
        an = np.hypot(ax, ay)
        fix = degenerate & (an > 0)
        v[0][fix] = alpha * ax[fix] / an[fix]
        v[1][fix] = alpha * ay[fix] / an[fix]
        unrepaired = degenerate & ~fix
        log.info("%d degenerate desired-velocity cells, %d left at zero", degenerate.sum(), unrepaired.sum())
    if not ok.any():
        log.warning("desired velocity has no non-degenerate cell; the potential is broken")

    v[:, ~walk] = 0.0
    v.flags.writeable = False
    return DesiredVelocityField(v, float(alpha), degenerate, unrepaired, _lipschitz(v, walk, grid.h))


def _lipschitz(v: np.ndarray, walk: np.ndarray, h: float) -> float:
    best = 0.0
    for axis in (1, 2):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis], b[axis] = slice(0, -1), slice(1, None)
        pair = walk[tuple(a[1:])] & walk[tuple(b[1:])]
        if pair.any():
            dv = np.hypot(*(v[tuple(a)] - v[tuple(b)]))
            best = max(best, float(dv[pair].max()) / h)
    return best
