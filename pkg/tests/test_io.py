import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pushcrowd import io
from pushcrowd.engine import initialize
from pushcrowd.presets import two_obstacles_neumann


@settings(max_examples=30, deadline=None)
@given(arrays(float, (5, 7), elements=st.floats(0, 1e6)))
def test_matrix_round_trip_is_exact(field):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        back = io.read_matrix(io.write_matrix(field, Path(d) / "f.txt"))
    assert np.array_equal(back, field)


def test_image_orientation():
    field = np.zeros((3, 2))
    field[2, 1] = 1.0  # right, top
    rows = io.to_image_rows(field)
    assert rows.shape == (2, 3) and rows[0, 2] == 1.0
    assert np.array_equal(io.from_image_rows(rows), field)


def test_zero_density_is_black(tmp_path):
    p = io.write_pgm(np.zeros((4, 4)), tmp_path / "z.pgm")
    assert (io.read_pgm(p) == 0).all()


def test_uniform_density_is_white(tmp_path):
    p = io.write_pgm(np.ones((4, 6)), tmp_path / "u.pgm")
    img = io.read_pgm(p)
    assert img.shape == (6, 4) and (img == 255).all()


def test_pgm_scales_to_max(tmp_path):
    f = np.array([[0.0, 1.0], [2.0, 4.0]])
    img = io.read_pgm(io.write_pgm(f, tmp_path / "s.pgm"))
    assert img.max() == 255 and img.min() == 0


def test_snapshot_round_trip(tmp_path):
    st = initialize(two_obstacles_neumann())
    st.densities[0] = st.densities[0] * np.pi
    p = io.write_snapshot(st, 0, tmp_path, images=True)
    assert p.name == "pop0_step000000.txt"
    assert (tmp_path / "pop0_step000000.pgm").exists()
    back = io.read_snapshot(p)
    assert np.all(np.abs(back - st.densities[0]) <= np.spacing(st.densities[0]))


def test_fields_export(tmp_path):
    st = initialize(two_obstacles_neumann())
    paths = io.write_fields(st, tmp_path)
    assert [p.name for p in paths] == ["pop0_potential.txt", "pop0_vd_x.txt", "pop0_vd_y.txt"]
    assert np.array_equal(io.read_matrix(paths[0]), st.potentials[0].u)


class _Rep:
    def __init__(self, d, c, g):
        self.max_density, self.cfl_ratio, self.guarded_cells = d, c, g


class _State:
    def __init__(self, step):
        self.step, self.time = step, step * 0.1
        self.exited, self.injected = [0.5, 0.25], [0.0, 1.0 / 3]

    def mass(self, n):
        return 1.0 + n


def test_metrics_header_and_order(tmp_path):
    steps = [(_State(s), [_Rep(2.0, 0.5, 0), _Rep(1.0, 0.25, 3)], [0, 1]) for s in (1, 2)]
    path = io.write_metrics(steps, tmp_path / "m.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(io.METRICS_HEADER)
    rows, marker = io.read_metrics(path)
    assert marker is None
    assert [(r["step"], r["pop"]) for r in rows] == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert rows[1]["mass_injected_cum"] == 1.0 / 3 and rows[1]["guarded_cells"] == 3


def test_truncation_marker(tmp_path):
    with io.MetricsWriter(tmp_path / "m.csv") as w:
        w.write_step(_State(1), [_Rep(1.0, 0.5, 0)], [0])
        w.truncate(1, "CFL")
    rows, marker = io.read_metrics(tmp_path / "m.csv")
    assert len(rows) == 1 and marker.startswith(io.TRUNCATION_MARKER)
