"""Simulation loop for one or more coupled populations."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CflViolation, DisconnectedDomain
from .geometry import BoundaryRun, CellKind, Grid, NeighborhoodSpec, Obstacle, Rect, build_grid, unreachable
from .interaction import InteractionParams, InteractionStencil, interaction_velocity, total_velocity
from .potential import BoundaryConditionSet, DesiredVelocityField, PotentialField, desired_velocity, solve_laplace
from .transport import StepReport, check_cfl, push_forward_step

log = logging.getLogger(__name__)


@dataclass(eq=False)
class SimulationState:
    step: int
    time: float
    grid: Grid
    densities: list
    desired: list
    potentials: list
    params: list
    stencils: list
    initial_mass: list
    exited: list
    injected: list
    exited_by_target: list
    guarded_total: list = field(default_factory=list)

    def mass(self, pop: int) -> float:
        return float(self.densities[pop].sum()) * self.grid.h**2

    def total_mass(self) -> float:
        return sum(self.mass(p) for p in range(len(self.densities)))

    def ledger_error(self, pop: int) -> float:
        """Relative mismatch of ``initial + injected = current + exited``."""
        lhs = self.initial_mass[pop] + self.injected[pop]
        rhs = self.mass(pop) + self.exited[pop]
        return abs(lhs - rhs) / max(lhs, 1e-300)


def build_scenario_grid(scenario) -> Grid:
    geo = scenario.geometry
    return build_grid(
        geo.m,
        obstacles=[Obstacle(o.id, Rect(*o.rect)) for o in geo.obstacles],
        targets=[BoundaryRun(t.side, t.start, t.stop, t.id) for t in geo.targets],
        inlets=[BoundaryRun(i.side, i.start, i.stop, i.population) for i in geo.inlets],
    )


def population_bcs(scenario, pop) -> BoundaryConditionSet:
    geo = scenario.geometry
    return BoundaryConditionSet(
        wall_sides=dict(geo.walls),
        obstacles={o.id: o.bc for o in geo.obstacles},
        inlet_bc=geo.inlet_bc,
        targets=None if pop.targets is None else tuple(pop.targets),
    )


def beta_matrix(scenario) -> np.ndarray:
    return np.array([p.beta for p in scenario.populations], dtype=float)


def initialize(scenario) -> SimulationState:
    phys = scenario.physics
    grid = build_scenario_grid(scenario)
    m = grid.m
    spec = NeighborhoodSpec(phys.radius, phys.theta_max, phys.anisotropic)
    beta = beta_matrix(scenario)
    params = InteractionParams(spec, phys.mode, beta, phys.wall_density)

    cache: dict = {}
    densities, desired, potentials, stencils, masses = [], [], [], [], []
    for n, pop in enumerate(scenario.populations):
        bcs = population_bcs(scenario, pop)
        key = (tuple(sorted(bcs.wall_sides.items())), tuple(sorted(bcs.obstacles.items())), bcs.inlet_bc, bcs.targets)
        if key not in cache:
            pot = solve_laplace(grid, bcs, tol=phys.laplace_tol)
            if not pot.converged:
                log.warning("potential of population %d did not converge (residual %.3g)", pop.id, pot.residual)
            vd = desired_velocity(pot, grid, phys.alpha, phys.grad_eps)
            cache[key] = (pot, vd, InteractionStencil(grid, vd, spec))
        pot, vd, st = cache[key]
        rho = np.zeros((m, m))
        for blob in pop.blobs:
            rho[Rect(*blob.rect).cells()] += blob.density
        if np.any(rho[grid.obstacle] != 0):
            raise ValueError(f"population {pop.id} places mass on obstacle cells")
        if grid.target_ids():
            bad = unreachable(grid, rho > 0, pop.targets)
            if bad.any():
                i, k = np.argwhere(bad)[0]
                raise DisconnectedDomain(f"population {pop.id}: cell ({i}, {k}) cannot reach its target")
        densities.append(rho)
        potentials.append(pot)
        desired.append(vd)
        stencils.append(st)
        masses.append(float(rho.sum()) * grid.h**2)

    n_pop = len(scenario.populations)
    return SimulationState(
        step=0,
        time=0.0,
        grid=grid,
        densities=densities,
        desired=desired,
        potentials=potentials,
        params=[params] * n_pop,
        stencils=stencils,
        initial_mass=masses,
        exited=[0.0] * n_pop,
        injected=[0.0] * n_pop,
        exited_by_target=[{} for _ in range(n_pop)],
        guarded_total=[0] * n_pop,
    )


def inflow_active(inflow, step: int) -> bool:
    return inflow.start <= step and (inflow.stop is None or step < inflow.stop)


def inflow_profile(scenario, inflow) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells of an inflow and the density injected into each of them."""
    m = scenario.geometry.m
    inlet = scenario.geometry.inlets[inflow.inlet]
    ci, ck = BoundaryRun(inlet.side, inlet.start, inlet.stop).boundary_cells(m)
    dens = np.full(len(ci), float(inflow.density))
    if inflow.perturbation:
        xi = np.random.default_rng(inflow.seed).uniform(-1.0, 1.0, len(ci))
        dens = dens * (1.0 + inflow.perturbation * xi)
    return ci, ck, dens


def velocities(state: SimulationState, scenario):
    """Total velocity of every population from the frozen current densities."""
    out = []
    for n, pop in enumerate(scenario.populations):
        params = state.params[n]
        if np.any(params.beta[n] != 0):
            nu = interaction_velocity(state.densities, n, state.desired[n], state.grid, params, state.stencils[n])
        else:
            nu = np.zeros_like(state.desired[n].v)
        out.append(total_velocity(state.desired[n], nu, scenario.physics.retrograde_guard))
    return out


def advance(state: SimulationState, scenario):
    """One step of every population; returns ``(new_state, reports)``.

    All interaction velocities are evaluated on the step-``n`` densities
    before any population moves.
    """
    grid = state.grid
    dt = scenario.physics.dt
    vel = velocities(state, scenario)
    for n, (v, _) in enumerate(vel):
        ratio = check_cfl(v, dt, grid)
        if ratio > 1.0:
            err = CflViolation(ratio, f"population {n}: CFL ratio {ratio:.6g} > 1 at step {state.step}")
            err.state = state
            raise err

    area = grid.h**2
    densities, reports = [], []
    exited = list(state.exited)
    injected = list(state.injected)
    by_target = [dict(d) for d in state.exited_by_target]
    guarded = list(state.guarded_total)
    for n, pop in enumerate(scenario.populations):
        v, n_guarded = vel[n]
        new, rep = push_forward_step(state.densities[n], v, dt, grid)
        gained = 0.0
        for inflow in pop.inflows:
            if inflow_active(inflow, state.step):
                ci, ck, dens = inflow_profile(scenario, inflow)
                before = new[ci, ck]
                after = np.maximum(before, dens)
                new[ci, ck] = after
                gained += float((after - before).sum()) * area
        rep.mass_injected = gained
        rep.mass_after = float(new.sum()) * area
        rep.max_density = float(new.max())
        rep.guarded_cells = n_guarded
        exited[n] += rep.mass_exited
        injected[n] += gained
        for t, mass in rep.exited_by_target.items():
            by_target[n][t] = by_target[n].get(t, 0.0) + mass
        guarded[n] += n_guarded
        densities.append(new)
        reports.append(rep)

    new_state = dataclasses.replace(
        state,
        step=state.step + 1,
        time=(state.step + 1) * dt,
        densities=densities,
        exited=exited,
        injected=injected,
        exited_by_target=by_target,
        guarded_total=guarded,
    )
    return new_state, reports


def _inflow_pending(scenario, step: int) -> bool:
    for pop in scenario.populations:
        for inflow in pop.inflows:
            if inflow.stop is None or step < inflow.stop:
                return True
    return False


def drained(state: SimulationState, scenario) -> bool:
    if _inflow_pending(scenario, state.step):
        return False
    ref = sum(state.initial_mass) + sum(state.injected)
    if ref <= 0:
        return True
    return state.total_mass() < scenario.schedule.mass_epsilon * ref


@dataclass
class RunResult:
    state: SimulationState
    reports: list = field(default_factory=list)  # per step: list of StepReport per population
    snapshots: list = field(default_factory=list)
    metrics_path: Path | None = None
    truncated: str | None = None


def run(scenario, out_dir=None, images: bool | None = None, n_steps: int | None = None, snapshot_every: int | None = None, on_step=None) -> RunResult:
    """Run a scenario to ``n_steps`` or until every population has drained.

    With ``out_dir`` set, density snapshots and ``metrics.csv`` are written
    there. ``on_step(state, reports)`` is called after every step.
    """
    from . import io

    sched = scenario.schedule
    n_steps = sched.n_steps if n_steps is None else n_steps
    every = sched.snapshot_every if snapshot_every is None else snapshot_every
    images = scenario.output.images if images is None else images
    state = initialize(scenario)
    result = RunResult(state)

    metrics = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.metrics_path = out_dir / "metrics.csv"
        metrics = io.MetricsWriter(result.metrics_path)

    def snapshot(st):
        if out_dir is None:
            return
        for n, pop in enumerate(scenario.populations):
            result.snapshots.append(io.write_snapshot(st, n, out_dir, pop_id=pop.id, images=images))

    try:
        snapshot(state)
        while state.step < n_steps and not drained(state, scenario):
            state, reps = advance(state, scenario)
            result.reports.append(reps)
            if metrics is not None:
                metrics.write_step(state, reps, [p.id for p in scenario.populations])
            if state.step % every == 0:
                snapshot(state)
            if on_step is not None:
                on_step(state, reps)
        if state.step % every != 0:
            snapshot(state)
    except CflViolation as err:
        result.truncated = str(err)
        if metrics is not None:
            metrics.truncate(state.step, str(err))
            snapshot(state)
            metrics.close()
        err.result = result
        raise
    finally:
        result.state = state
        if metrics is not None:
            metrics.close()
    return result
