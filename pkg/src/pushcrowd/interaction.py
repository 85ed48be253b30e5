"""Nonlocal interaction velocity and velocity assembly."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionMismatch
from .geometry import SIDES, Grid, NeighborhoodSpec, ball_offsets, visible
from .potential import DesiredVelocityField

MASS_DEPENDENT = "mass_dependent"
MASS_INDEPENDENT = "mass_independent"


@dataclass(frozen=True, eq=False)
class InteractionParams:
    spec: NeighborhoodSpec
    mode: str = MASS_DEPENDENT
    beta: np.ndarray = None  # (n_pop, n_pop)
    wall_density: float = 0.0

    def __post_init__(self):
        if self.mode not in (MASS_DEPENDENT, MASS_INDEPENDENT):
            raise ValueError(f"unknown interaction mode {self.mode!r}")
        beta = np.atleast_2d(np.asarray(0.0 if self.beta is None else self.beta, dtype=float))
        if beta.shape[0] != beta.shape[1]:
            raise DimensionMismatch(f"beta must be square, got shape {beta.shape}")
        off = beta[~np.eye(len(beta), dtype=bool)]
        if np.any(off < 0):
            raise ValueError("cross-population beta entries must be >= 0")
        if not self.wall_density >= 0:
            raise ValueError("wall density must be >= 0")
        object.__setattr__(self, "beta", beta)

    def bound(self, self_index: int, density_max: float, h: float) -> float:
        """Largest |nu| any density field bounded by ``density_max`` can produce."""
        row = np.abs(self.beta[self_index]).sum()
        if self.mode == MASS_INDEPENDENT:
            return float(row)
        offs = ball_offsets(h, self.spec.radius)
        dens = max(density_max, self.wall_density)
        return float(row * dens * h**3 * np.hypot(offs[:, 0], offs[:, 1]).sum() / self.spec.radius)


class InteractionStencil:
    """Static part of the interaction sum for one population.

    The visibility sector depends only on the desired direction, which does
    not change during a run, so the per-cell membership masks are computed
    once. Offsets ``(-a, dy)`` and ``(a, dy)`` are summed as a pair before
    being accumulated; this keeps the result exactly antisymmetric under an
    x-mirror of the inputs.
    """

    def __init__(self, grid: Grid, desired: DesiredVelocityField, spec: NeighborhoodSpec):
        self.grid = grid
        self.spec = spec
        m = grid.m
        self.offsets = ball_offsets(grid.h, spec.radius)
        self.pad = int(np.abs(self.offsets).max()) if len(self.offsets) else 0
        if spec.anisotropic and len(self.offsets):
            d = desired.direction
            self.masks = visible(self.offsets, (d[0], d[1]), spec).astype(float)
        else:
            self.masks = None
        groups = []
        n = 0
        while n < len(self.offsets):
            dx, dy = self.offsets[n]
            if dx != 0 and n + 1 < len(self.offsets) and tuple(self.offsets[n + 1]) == (-dx, dy):
                groups.append((n, n + 1))
                n += 2
            else:
                groups.append((n,))
                n += 1
        self.groups = groups
        self.exit_ghost = self._exit_ghost(m)
        self._kernel_args = None

    def _exit_ghost(self, m: int) -> np.ndarray:
        """Padded mask of exterior cells lying straight beyond a target face."""
        g = self.pad
        out = np.zeros((m + 2 * g, m + 2 * g), dtype=bool)
        if g == 0:
            return out
        for side in SIDES:
            sel = np.flatnonzero(self.grid.face_target[side] >= 0) + g
            if side == "left":
                out[np.ix_(np.arange(g), sel)] = True
            elif side == "right":
                out[np.ix_(np.arange(m + g, m + 2 * g), sel)] = True
            elif side == "bottom":
                out[np.ix_(sel, np.arange(g))] = True
            else:
                out[np.ix_(sel, np.arange(m + g, m + 2 * g))] = True
        return out

    def effective_density(self, rho: np.ndarray, wall_density: float) -> np.ndarray:
        """Density padded by ghost rings: walls and obstacles carry ``wall_density``.

        Exterior cells directly beyond an exit carry zero, so exits do not repel.
        """
        g = self.pad
        out = np.pad(np.where(self.grid.obstacle, wall_density, rho), g, constant_values=wall_density)
        out[self.exit_ghost] = 0.0
        return out

    def moments(self, weighted: np.ndarray, own: np.ndarray | None):
        """Raw sums ``sum (x - y) w(y)`` (in cell units) and ``sum own(y)``."""
        if self._kernel_args is None:
            g0 = np.array([grp[0] for grp in self.groups], dtype=np.int64)
            g1 = np.array([grp[1] if len(grp) == 2 else -1 for grp in self.groups], dtype=np.int64)
            masks = self.masks if self.masks is not None else np.ones((1, 1, 1))
            self._kernel_args = (self.offsets.astype(np.int64), g0, g1, masks)
        offs, g0, g1, masks = self._kernel_args
        has_own = own is not None
        sx, sy, mass = _moments_kernel(
            np.ascontiguousarray(weighted, dtype=float),
            np.ascontiguousarray(own, dtype=float) if has_own else np.zeros((1, 1)),
            has_own, masks, self.masks is not None, offs, g0, g1, self.grid.m, self.pad,
        )
        return sx, sy, (mass if has_own else None)

    def moments_reference(self, weighted: np.ndarray, own: np.ndarray | None):
        """Whole-array version of :meth:`moments`, kept as a test oracle."""
        m, g = self.grid.m, self.pad
        sx = np.zeros((m, m))
        sy = np.zeros((m, m))
        mass = np.zeros((m, m)) if own is not None else None

        def window(a, o):
            dx, dy = self.offsets[o]
            return a[g + dx : g + dx + m, g + dy : g + dy + m]

        for grp in self.groups:
            cw = []
            co = []
            for o in grp:
                w = window(weighted, o)
                ow = window(own, o) if own is not None else None
                if self.masks is not None:
                    w = w * self.masks[o]
                    if ow is not None:
                        ow = ow * self.masks[o]
                cw.append(w)
                co.append(ow)
            dx, dy = self.offsets[grp[0]]
            if len(grp) == 2:
                # grp = ((-a, dy), (a, dy)); x - y is (+a, -dy) and (-a, -dy)
                a = -dx
                sx += a * (cw[0] - cw[1])
                sy += -dy * (cw[0] + cw[1])
                if own is not None:
                    mass += co[0] + co[1]
            else:
                sx += -dx * cw[0]
                sy += -dy * cw[0]
                if own is not None:
                    mass += co[0]
        return sx, sy, mass


@numba.njit(cache=True)
def _moments_kernel(weighted, own, has_own, masks, has_mask, offs, g0, g1, m, g):
    # same grouping and per-cell operation order as moments_reference
    sx = np.zeros((m, m))
    sy = np.zeros((m, m))
    mass = np.zeros((m, m))
    for n in range(g0.shape[0]):
        o0 = g0[n]
        o1 = g1[n]
        dx = offs[o0, 0]
        dy = offs[o0, 1]
        for i in range(m):
            for k in range(m):
                w0 = weighted[g + i + dx, g + k + dy]
                if has_mask:
                    w0 = w0 * masks[o0, i, k]
                if o1 >= 0:
                    w1 = weighted[g + i - dx, g + k + dy]
                    if has_mask:
                        w1 = w1 * masks[o1, i, k]
                    sx[i, k] += -dx * (w0 - w1)
                    sy[i, k] += -dy * (w0 + w1)
                else:
                    sx[i, k] += -dx * w0
                    sy[i, k] += -dy * w0
                if has_own:
                    c0 = own[g + i + dx, g + k + dy]
                    if has_mask:
                        c0 = c0 * masks[o0, i, k]
                    if o1 >= 0:
                        c1 = own[g + i - dx, g + k + dy]
                        if has_mask:
                            c1 = c1 * masks[o1, i, k]
                        mass[i, k] += c0 + c1
                    else:
                        mass[i, k] += c0
    return sx, sy, mass


def interaction_velocity(
    densities,
    self_index: int,
    desired: DesiredVelocityField,
    grid: Grid,
    params: InteractionParams,
    stencil: InteractionStencil | None = None,
) -> np.ndarray:
    """Interaction velocity of population ``self_index`` as a ``(2, m, m)`` field.

    Mass-dependent mode (and any multi-population run) uses the unnormalized
    moment ``(1/R) sum_j beta_ij int (x - y) d mu_j``; mass-independent mode
    divides it by the population's own effective mass in the neighborhood,
    so ``|nu| <= sum_j |beta_ij|``.
    """
    densities = [np.asarray(r, dtype=float) for r in densities]
    n = len(densities)
    if params.beta.shape != (n, n):
        raise DimensionMismatch(f"beta has shape {params.beta.shape} for {n} densities")
    if not 0 <= self_index < n:
        raise DimensionMismatch(f"population index {self_index} out of range")
    for r in densities:
        if np.any(r < 0):
            raise ValueError("densities must be nonnegative")
    if stencil is None:
        stencil = InteractionStencil(grid, desired, params.spec)
    m, h = grid.m, grid.h
    nu = np.zeros((2, m, m))
    if len(stencil.offsets) == 0:
        return nu

    hats = [stencil.effective_density(r, params.wall_density) for r in densities]
    row = params.beta[self_index]
    weighted = None
    for j in range(n):
        term = row[j] * hats[j]
        weighted = term if weighted is None else weighted + term
    own = hats[self_index] if params.mode == MASS_INDEPENDENT else None
    sx, sy, mass = stencil.moments(weighted, own)

    R = params.spec.radius
    if params.mode == MASS_INDEPENDENT:
        ok = mass > 0
        # h from cell units to length; the area factors cancel
        nu[0][ok] = h * sx[ok] / (R * mass[ok])
        nu[1][ok] = h * sy[ok] / (R * mass[ok])
    else:
        scale = h**3 / R
        nu[0] = scale * sx
        nu[1] = scale * sy
    nu[:, grid.obstacle] = 0.0
    return nu


def total_velocity(desired: DesiredVelocityField, nu: np.ndarray, retrograde_guard: bool = False):
    """``v = v_d + nu``; returns ``(v, n_guarded)``.

    With the guard on, cells walking against their desired direction lose
    the backward part of ``nu`` so that ``v . d = 0`` there.
    """
    v = desired.v + nu
    if not retrograde_guard:
        return v, 0
    d = desired.direction
    along = v[0] * d[0] + v[1] * d[1]
    bad = along < 0
    if bad.any():
        v[0][bad] -= along[bad] * d[0][bad]
        v[1][bad] -= along[bad] * d[1][bad]
    return v, int(bad.sum())
