import dataclasses

import numpy as np
import pytest

from pushcrowd import io
from pushcrowd.engine import advance, initialize, run, velocities
from pushcrowd.errors import CflViolation, DisconnectedDomain
from pushcrowd.potential import NEUMANN
from pushcrowd.presets import crossing_flows, narrow_passage
from pushcrowd.scenario import (
    Blob,
    GeometryConfig,
    Inflow,
    InletSpec,
    ObstacleSpec,
    PhysicsConfig,
    PopulationConfig,
    Scenario,
    Schedule,
    TargetSpec,
)
from pushcrowd.transport import push_forward_step

M = 32


def small(beta=((4.0,),), blobs=((Blob((2, 10, 8, 24), 1.0),),), n_steps=40, dt=None, **phys):
    geometry = GeometryConfig(M, targets=(TargetSpec(0, "right", 0, M),), walls=(("bottom", NEUMANN), ("top", NEUMANN)))
    physics = PhysicsConfig(dt=dt or 0.25 / M, radius=0.15, **phys)
    pops = tuple(PopulationConfig(n, tuple(row), blobs=b) for n, (row, b) in enumerate(zip(beta, blobs)))
    return Scenario("small", geometry, physics, pops, Schedule(n_steps, 10))


def test_initialize_places_blobs():
    s = small()
    st = initialize(s)
    assert st.step == 0 and st.time == 0
    assert (st.densities[0][2:10, 8:24] == 1).all()
    assert st.initial_mass[0] == pytest.approx(8 * 16 / M**2)
    assert np.abs(st.desired[0].v[0] - 1).max() < 1e-6


def test_empty_scenario_is_a_no_op(tmp_path):
    s = small(blobs=((),))
    res = run(s, tmp_path)
    assert res.state.step == 0
    assert [p.name for p in res.snapshots] == ["pop0_step000000.txt"]
    rows, marker = io.read_metrics(res.metrics_path)
    assert rows == [] and marker is None


def test_zero_steps_writes_initial_snapshot_only(tmp_path):
    res = run(small(), tmp_path, n_steps=0)
    assert [p.name for p in res.snapshots] == ["pop0_step000000.txt"]
    assert res.metrics_path.read_text().splitlines() == [",".join(io.METRICS_HEADER)]


def test_snapshots_and_metrics(tmp_path):
    res = run(small(n_steps=25), tmp_path)
    names = [p.name for p in res.snapshots]
    assert names == [f"pop0_step{n:06d}.txt" for n in (0, 10, 20, 25)]
    rows, _ = io.read_metrics(res.metrics_path)
    assert [r["step"] for r in rows] == list(range(1, 26))
    last = io.read_snapshot(res.snapshots[-1])
    assert np.array_equal(last, res.state.densities[0])


def test_ledger_every_step():
    s = small(n_steps=60)
    errors = []
    run(s, on_step=lambda st, reps: errors.append(st.ledger_error(0)))
    assert len(errors) == 60 and max(errors) <= 1e-9


def test_deterministic():
    s = small(n_steps=30)
    a = run(s).state.densities[0]
    b = run(s).state.densities[0]
    assert np.array_equal(a, b)


def test_zero_beta_is_pure_advection():
    s = small(beta=((0.0,),), n_steps=20)
    st = initialize(s)
    rho = st.densities[0]
    v = st.desired[0].v
    for _ in range(20):
        rho, _ = push_forward_step(rho, v, s.physics.dt, st.grid)
    assert np.array_equal(run(s).state.densities[0], rho)


def test_populations_move_on_frozen_densities():
    blobs = ((Blob((2, 10, 8, 16), 1.0),), (Blob((6, 14, 12, 20), 1.0),))
    s = small(beta=((2.0, 3.0), (1.0, 2.0)), blobs=blobs)
    st = initialize(s)
    vel = velocities(st, s)
    want = [push_forward_step(st.densities[n], vel[n][0], s.physics.dt, st.grid)[0] for n in (0, 1)]
    new, reps = advance(st, s)
    assert all(np.array_equal(a, b) for a, b in zip(new.densities, want))
    assert len(reps) == 2 and new.step == 1


def test_cross_beta_zero_decouples():
    a, b = Blob((2, 10, 8, 16), 1.0), Blob((4, 12, 14, 22), 0.5)
    joint = run(small(beta=((3.0, 0.0), (0.0, 2.0)), blobs=((a,), (b,)))).state
    solo0 = run(small(beta=((3.0,),), blobs=((a,),))).state
    solo1 = run(small(beta=((2.0,),), blobs=((b,),))).state
    assert np.array_equal(joint.densities[0], solo0.densities[0])
    assert np.array_equal(joint.densities[1], solo1.densities[0])


def test_cfl_violation_truncates(tmp_path):
    s = small(dt=2.0 / M, n_steps=5)
    with pytest.raises(CflViolation) as info:
        run(s, tmp_path)
    res = info.value.result
    assert res.state.step == 0
    rows, marker = io.read_metrics(res.metrics_path)
    assert rows == [] and marker.startswith(io.TRUNCATION_MARKER)


def test_inflow_tops_up_inlet_cells():
    geometry = GeometryConfig(
        M,
        targets=(TargetSpec(0, "right", 0, M),),
        inlets=(InletSpec(0, "left", 8, 24),),
        walls=(("bottom", NEUMANN), ("top", NEUMANN)),
    )
    pop = PopulationConfig(0, (0.0,), inflows=(Inflow(0, 0.8, start=0, stop=3),))
    s = Scenario("inflow", geometry, PhysicsConfig(dt=0.5 / M), (pop,), Schedule(10))
    st = initialize(s)
    for n in range(5):
        st, reps = advance(st, s)
        if n < 3:
            assert (st.densities[0][0, 8:24] >= 0.8).all()
        assert st.ledger_error(0) < 1e-12
    assert reps[0].mass_injected == 0
    assert st.injected[0] > 0


def test_inflow_perturbation_is_seeded():
    a = crossing_flows()
    st = initialize(a)
    st, _ = advance(st, a)
    band = st.densities[0][0, a.geometry.inlets[0].start:a.geometry.inlets[0].stop]
    assert band.max() > band.min()
    st2, _ = advance(initialize(a), a)
    assert np.array_equal(st.densities[0], st2.densities[0])


def test_unreachable_mass_is_rejected():
    geometry = GeometryConfig(M, obstacles=(ObstacleSpec(0, (16, 17, 0, M)),), targets=(TargetSpec(0, "right", 0, M),))
    pop = PopulationConfig(0, (0.0,), blobs=(Blob((2, 6, 2, 6), 1.0),))
    with pytest.raises(DisconnectedDomain):
        initialize(Scenario("cut", geometry, PhysicsConfig(dt=0.01), (pop,), Schedule(1)))


def test_crossing_potentials_mirror():
    st = initialize(crossing_flows())
    u0, u1 = st.potentials[0].u, st.potentials[1].u
    x = (np.arange(u0.shape[0]) + 0.5) / u0.shape[0]
    assert np.abs(u0 - x[:, None]).max() < 1e-6
    assert np.abs(u1 - (1 - x)[:, None]).max() < 1e-6


def test_narrow_passage_drains_completely():
    s = narrow_passage()
    s = dataclasses.replace(s, schedule=dataclasses.replace(s.schedule, mass_epsilon=1e-12))
    st = run(s).state
    assert st.total_mass() < 1e-12 * st.initial_mass[0]
    assert st.exited[0] == pytest.approx(st.initial_mass[0], rel=1e-9)
