import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushcrowd.errors import DisconnectedDomain, OutOfBounds, OverlapConflict
from pushcrowd.geometry import (
    BoundaryRun,
    CellKind,
    NeighborhoodSpec,
    Obstacle,
    Rect,
    ball_offsets,
    build_grid,
    neighborhood_cells,
    unreachable,
    visible,
)


def test_empty_grid_is_all_free():
    g = build_grid(8)
    assert g.h == 1 / 8
    assert g.kind_counts()[CellKind.FREE] == 64
    assert g.walkable.all()
    assert g.target_ids() == []


def test_only_listed_cells_get_kinds():
    g = build_grid(
        10,
        obstacles=[Obstacle(3, Rect(4, 6, 2, 5))],
        targets=[BoundaryRun("right", 1, 4, 7)],
        inlets=[BoundaryRun("left", 5, 9, 0)],
    )
    counts = g.kind_counts()
    assert counts[CellKind.OBSTACLE] == 6
    assert counts[CellKind.TARGET] == 3
    assert counts[CellKind.INLET] == 4
    assert counts[CellKind.FREE] == 100 - 13
    assert (g.label[4:6, 2:5] == 3).all()
    assert (g.label[9, 1:4] == 7).all()
    assert list(g.face_target["right"][:5]) == [-1, 7, 7, 7, -1]
    assert g.target_ids() == [7]


def test_arrays_are_read_only():
    g = build_grid(6)
    with pytest.raises(ValueError):
        g.kind[0, 0] = 1


def test_centers():
    g = build_grid(4)
    x, y = g.centers()
    assert x[0, 0] == 0.125 and y[0, 3] == 0.875 and x[3, 0] == 0.875


@pytest.mark.parametrize("m", [0, 3, 2.5])
def test_bad_size(m):
    with pytest.raises(ValueError):
        build_grid(m)


def test_out_of_bounds():
    with pytest.raises(OutOfBounds):
        build_grid(8, obstacles=[Rect(6, 9, 0, 2)])
    with pytest.raises(OutOfBounds):
        build_grid(8, targets=[BoundaryRun("top", 5, 9)])


def test_overlaps_are_rejected_with_ids():
    with pytest.raises(OverlapConflict, match="obstacle 2 overlaps obstacle 1"):
        build_grid(8, obstacles=[Obstacle(1, Rect(0, 3, 0, 3)), Obstacle(2, Rect(2, 4, 2, 4))])
    with pytest.raises(OverlapConflict, match="target 5 overlaps obstacle 1"):
        build_grid(8, obstacles=[Obstacle(1, Rect(6, 8, 0, 3))], targets=[BoundaryRun("right", 2, 5, 5)])
    with pytest.raises(OverlapConflict, match="target 1 overlaps target 0"):
        build_grid(8, targets=[BoundaryRun("right", 0, 4, 0), BoundaryRun("right", 3, 6, 1)])


def test_inlet_may_share_faces_with_target():
    g = build_grid(8, targets=[BoundaryRun("left", 0, 8, 1)], inlets=[BoundaryRun("left", 2, 6, 0)])
    assert g.kind[0, 3] == CellKind.INLET
    assert g.kind[0, 0] == CellKind.TARGET
    assert g.open_face("left").all()


def test_walled_off_inlet_is_disconnected():
    with pytest.raises(DisconnectedDomain):
        build_grid(
            8,
            obstacles=[Rect(2, 3, 0, 8)],
            targets=[BoundaryRun("right", 0, 8)],
            inlets=[BoundaryRun("left", 2, 4)],
        )


def test_unreachable_respects_target_subset():
    g = build_grid(
        9,
        obstacles=[Rect(4, 5, 0, 9)],
        targets=[BoundaryRun("left", 0, 9, 0), BoundaryRun("right", 0, 9, 1)],
    )
    cells = np.zeros((9, 9), dtype=bool)
    cells[1, 1] = cells[7, 7] = True
    assert not unreachable(g, cells).any()
    bad = unreachable(g, cells, target_ids=[1])
    assert bad[1, 1] and not bad[7, 7]


def test_ball_offsets_small_radius():
    offs = ball_offsets(0.1, 0.1)
    assert sorted(map(tuple, offs)) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    assert len(ball_offsets(0.1, 0.05)) == 0


@given(st.integers(2, 40), st.floats(0.01, 0.3))
def test_ball_offsets_match_brute_force(m, radius):
    h = 1 / m
    offs = ball_offsets(h, radius)
    n = int(radius / h) + 2
    brute = {
        (dx, dy)
        for dx in range(-n, n + 1)
        for dy in range(-n, n + 1)
        if (dx, dy) != (0, 0) and math.hypot(dx, dy) * h <= radius * (1 + 1e-12)
    }
    assert set(map(tuple, offs)) == brute
    # (-a, dy) and (a, dy) are adjacent
    idx = {tuple(o): i for i, o in enumerate(offs)}
    for (dx, dy), i in idx.items():
        if dx > 0:
            assert idx[(-dx, dy)] == i - 1


def test_half_ball_includes_boundary_ties():
    spec = NeighborhoodSpec(1.0)
    offs = np.array([[1, 0], [0, 1], [0, -1], [-1, 0], [1, 1]])
    assert list(visible(offs, (1.0, 0.0), spec)) == [True, True, True, False, True]


def test_sector_narrows_the_half_ball():
    spec = NeighborhoodSpec(1.0, theta_max=math.pi / 4)
    offs = np.array([[1, 0], [1, 1], [1, 2], [0, 1]])
    assert list(visible(offs, (1.0, 0.0), spec)) == [True, True, False, False]


def test_isotropic_sees_everything():
    spec = NeighborhoodSpec(1.0, anisotropic=False)
    offs = np.array([[1, 0], [-1, 0]])
    assert visible(offs, (1.0, 0.0), spec).all()


def test_visible_per_cell_directions():
    spec = NeighborhoodSpec(1.0)
    offs = np.array([[1, 0], [-1, 0]])
    d = np.array([[1.0, -1.0]]), np.array([[0.0, 0.0]])
    mask = visible(offs, d, spec)
    assert mask.shape == (2, 1, 2)
    assert mask[0, 0].tolist() == [True, False]
    assert mask[1, 0].tolist() == [False, True]


@settings(max_examples=50)
@given(st.floats(0, 2 * math.pi), st.floats(0.02, 0.15))
def test_neighborhood_cells_brute_force(angle, radius):
    g = build_grid(20)
    d = (math.cos(angle), math.sin(angle))
    spec = NeighborhoodSpec(radius)
    got = {c for c, w in neighborhood_cells(g, (10, 10), d, spec)}
    xc, yc = 10.5 * g.h, 10.5 * g.h
    want = set()
    for i in range(-5, 26):
        for k in range(-5, 26):
            rx, ry = (i + 0.5) * g.h - xc, (k + 0.5) * g.h - yc
            r = math.hypot(rx, ry)
            if 0 < r <= radius * (1 + 1e-12) and rx * d[0] + ry * d[1] >= -1e-12 * r:
                want.add((i, k))
    assert got == want
    assert all(w == g.h**2 for _, w in neighborhood_cells(g, (10, 10), d, spec))


def test_neighborhood_cells_errors():
    g = build_grid(8, obstacles=[Rect(0, 1, 0, 1)])
    spec = NeighborhoodSpec(0.3)
    with pytest.raises(OutOfBounds):
        neighborhood_cells(g, (8, 0), (1.0, 0.0), spec)
    with pytest.raises(ValueError):
        neighborhood_cells(g, (0, 0), (1.0, 0.0), spec)
    with pytest.raises(ValueError):
        neighborhood_cells(g, (3, 3), (2.0, 0.0), spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        NeighborhoodSpec(0.0)
    with pytest.raises(ValueError):
        NeighborhoodSpec(0.1, theta_max=2.0)
    assert NeighborhoodSpec(0.1).cos_theta == 0.0


def test_rect_mirror():
    assert Rect(1, 3, 0, 2).mirrored(10) == Rect(7, 9, 0, 2)
