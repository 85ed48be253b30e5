"""The five case-study scenarios as ready-made :class:`Scenario` objects.

Grid indices are given for ``m = 128`` unless a preset says otherwise.
Time steps follow ``dt = 0.5 h / (alpha + bound)``, where ``bound`` is the
largest interaction speed that the initial (or injected) density can
produce when it fills the whole neighborhood.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import NeighborhoodSpec
from .interaction import MASS_DEPENDENT, InteractionParams
from .potential import DIRICHLET, NEUMANN
from .scenario import (
    Blob,
    GeometryConfig,
    Inflow,
    InletSpec,
    ObstacleSpec,
    OutputConfig,
    PhysicsConfig,
    PopulationConfig,
    Scenario,
    Schedule,
    TargetSpec,
)

M = 128
RADIUS = 0.1


def stable_dt(m: int, alpha: float, beta, radius: float, density_cap: float, mode: str = MASS_DEPENDENT,
              wall_density: float = 0.0, safety: float = 0.5) -> float:
    """``safety * h / (alpha + bound)`` with the bound taken over every population row."""
    h = 1.0 / m
    params = InteractionParams(NeighborhoodSpec(radius), mode, np.atleast_2d(beta), wall_density)
    bound = max(params.bound(i, density_cap, h) for i in range(len(params.beta)))
    return safety * h / (alpha + bound)


def _bottleneck(i0: int, k_lo: int, k_hi: int, ident: int, thick: int = 4):
    """Two walls of length ``M - i0`` around the corridor ``[k_lo, k_hi)``.

    The row facing the corridor repels (Dirichlet); the rest of each wall is
    zero-flux so that the corridor mouth only mildly repels.
    """
    return [
        ObstacleSpec(ident, (i0, M, k_lo - 1, k_lo), DIRICHLET),
        ObstacleSpec(ident + 1, (i0, M, k_lo - thick, k_lo - 1), NEUMANN),
        ObstacleSpec(ident + 2, (i0, M, k_hi, k_hi + 1), DIRICHLET),
        ObstacleSpec(ident + 3, (i0, M, k_hi + 1, k_hi + thick), NEUMANN),
    ]


# single-population crowd parameters shared by the obstacle presets
CROWD_BETA = 100.0
CROWD_DENSITY = 1.0
CROWD_STEPS = 4000


# With u = 0 on every wall the potential decays fast away from the exit, so
# the room needs a much tighter solve than the default to keep directions.
ROOM_TOL = 1e-13
ROOM_GRAD_EPS = 1e-10


def _crowd_physics(wall_density=CROWD_DENSITY, beta=CROWD_BETA) -> PhysicsConfig:
    return PhysicsConfig(
        dt=stable_dt(M, 1.0, [[beta]], RADIUS, CROWD_DENSITY, wall_density=wall_density),
        alpha=1.0,
        radius=RADIUS,
        wall_density=wall_density,
        laplace_tol=ROOM_TOL,
        grad_eps=ROOM_GRAD_EPS,
    )


def _three_groups(shift: int = 0):
    return (
        Blob((8, 32, 24 + shift, 44 + shift), CROWD_DENSITY),
        Blob((8, 32, 54 + shift, 74 + shift), CROWD_DENSITY),
        Blob((8, 32, 84 + shift, 104 + shift), CROWD_DENSITY),
    )


def narrow_passage() -> Scenario:
    geometry = GeometryConfig(
        m=M,
        obstacles=tuple(_bottleneck(108, 58, 70, 0)),
        targets=(TargetSpec(0, "right", 58, 70),),
    )
    pop = PopulationConfig(0, (CROWD_BETA,), blobs=_three_groups())
    return Scenario("narrow_passage", geometry, _crowd_physics(), (pop,),
                    Schedule(CROWD_STEPS, 50), OutputConfig("out/narrow_passage"))


def two_passages() -> Scenario:
    # lower corridor [40, 52) is the near one for a crowd centred at y ~ 0.38
    geometry = GeometryConfig(
        m=M,
        obstacles=tuple(_bottleneck(108, 40, 52, 0) + _bottleneck(108, 76, 88, 4)),
        targets=(TargetSpec(0, "right", 40, 52), TargetSpec(1, "right", 76, 88)),
    )
    pop = PopulationConfig(0, (CROWD_BETA,), blobs=_three_groups(-16))
    return Scenario("two_passages", geometry, _crowd_physics(), (pop,),
                    Schedule(CROWD_STEPS, 50), OutputConfig("out/two_passages"))


def _two_obstacles(bc: str) -> Scenario:
    geometry = GeometryConfig(
        m=M,
        obstacles=(
            ObstacleSpec(0, (72, 84, 36, 56), bc),
            ObstacleSpec(1, (72, 84, 72, 92), bc),
        ),
        targets=(TargetSpec(0, "right", 56, 72),),
    )
    pop = PopulationConfig(0, (CROWD_BETA,), blobs=(Blob((8, 36, 44, 84), CROWD_DENSITY),))
    name = f"two_obstacles_{bc}"
    return Scenario(name, geometry, _crowd_physics(), (pop,), Schedule(CROWD_STEPS, 50), OutputConfig(f"out/{name}"))


def two_obstacles_dirichlet() -> Scenario:
    return _two_obstacles(DIRICHLET)


def two_obstacles_neumann() -> Scenario:
    return _two_obstacles(NEUMANN)


# lane/cluster parameters
DRIFT_BETA = 200.0
DRIFT_DENSITY = 1.0


def _drift(anisotropic: bool, name: str) -> Scenario:
    geometry = GeometryConfig(
        m=M,
        targets=(TargetSpec(0, "right", 0, M),),
        walls=(("bottom", NEUMANN), ("top", NEUMANN)),
    )
    physics = PhysicsConfig(
        dt=stable_dt(M, 1.0, [[DRIFT_BETA]], RADIUS, DRIFT_DENSITY, wall_density=DRIFT_DENSITY),
        alpha=1.0,
        radius=RADIUS,
        anisotropic=anisotropic,
        wall_density=DRIFT_DENSITY,
    )
    pop = PopulationConfig(0, (DRIFT_BETA,), blobs=(Blob((4, 44, 24, 104), DRIFT_DENSITY),))
    return Scenario(name, geometry, physics, (pop,), Schedule(2000, 25), OutputConfig(f"out/{name}"))


def lanes() -> Scenario:
    return _drift(True, "lanes")


def clusters() -> Scenario:
    return _drift(False, "clusters")


# crossing flows: odd m keeps the red-black ordering mirror-invariant
CROSS_M = 63
CROSS_BETA = 30.0
CROSS_DENSITY = 1.0
CROSS_PERTURBATION = 1e-3


def crossing_flows(perturbation: float = CROSS_PERTURBATION) -> Scenario:
    m = CROSS_M
    band = (m // 4, m - m // 4)
    geometry = GeometryConfig(
        m=m,
        targets=(TargetSpec(0, "right", 0, m), TargetSpec(1, "left", 0, m)),
        inlets=(InletSpec(0, "left", *band), InletSpec(1, "right", *band)),
        walls=(("bottom", NEUMANN), ("top", NEUMANN)),
        inlet_bc=DIRICHLET,
    )
    beta = [[0.0, CROSS_BETA], [CROSS_BETA, 0.0]]
    physics = PhysicsConfig(
        dt=stable_dt(m, 1.0, beta, RADIUS, CROSS_DENSITY, wall_density=CROSS_DENSITY),
        alpha=1.0,
        radius=RADIUS,
        wall_density=CROSS_DENSITY,
    )
    pops = (
        PopulationConfig(0, (0.0, CROSS_BETA), targets=(0,),
                         inflows=(Inflow(0, CROSS_DENSITY, perturbation=perturbation, seed=0),)),
        PopulationConfig(1, (CROSS_BETA, 0.0), targets=(1,), inflows=(Inflow(1, CROSS_DENSITY),)),
    )
    return Scenario("crossing_flows", geometry, physics, pops, Schedule(3000, 100), OutputConfig("out/crossing_flows"))


PRESETS = {
    "narrow_passage": narrow_passage,
    "two_passages": two_passages,
    "two_obstacles_dirichlet": two_obstacles_dirichlet,
    "two_obstacles_neumann": two_obstacles_neumann,
    "lanes": lanes,
    "clusters": clusters,
    "crossing_flows": crossing_flows,
}


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
