import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadperc import InvalidConfigError, Window, empirical_density, jittered_lattice, lattice_points, sample_poisson
from spreadperc.geometry import displacement, load_cloud, min_image, save_cloud


def test_window_volume_and_bounds():
    w = Window((2.0, 3.0, 4.0), "free", (1.0, 0.0, -1.0))
    assert w.volume == 24.0
    assert w.d == 3
    assert np.array_equal(w.upper, [3.0, 3.0, 3.0])


@pytest.mark.parametrize("sides", [(0.0, 1.0), (-1.0,), ()])
def test_window_rejects_bad_sides(sides):
    with pytest.raises(InvalidConfigError):
        Window(sides)


def test_window_rejects_unknown_boundary():
    with pytest.raises(InvalidConfigError):
        Window((1.0, 1.0), "mirror")


def test_poisson_points_inside_and_finite():
    w = Window.cube(20.0, 2)
    c = sample_poisson(w, 1.0, 5)
    assert np.isfinite(c.points).all()
    assert c.points.shape[1] == 2
    assert w.contains(c.points).all()
    assert c.provenance == "poisson"


def test_poisson_is_deterministic_byte_for_byte(tmp_path):
    w = Window.cube(16.0, 2)
    a, b = sample_poisson(w, 1.0, 9), sample_poisson(w, 1.0, 9)
    save_cloud(a, tmp_path / "a.csv")
    save_cloud(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()


def test_save_load_roundtrip(tmp_path):
    c = sample_poisson(Window.cube(8.0, 3, "free"), 2.0, 4)
    save_cloud(c, tmp_path / "c.csv")
    back = load_cloud(tmp_path / "c.csv")
    assert np.array_equal(back.points, c.points)
    assert np.array_equal(back.ids, c.ids)
    assert back.window.boundary == "free"
    assert back.metadata() == c.metadata()


def test_poisson_count_distribution():
    # count in a window of volume 50 is Poisson(50): check mean and variance
    w = Window.cube(math.sqrt(50.0), 2)
    n = np.array([len(sample_poisson(w, 1.0, k)) for k in range(2000)])
    assert abs(n.mean() - 50) < 3 * math.sqrt(50 / 2000)
    assert abs(n.var(ddof=1) / 50 - 1) < 0.15


def test_disjoint_subbox_counts_uncorrelated():
    w = Window.cube(10.0, 2)
    left = Window((5.0, 10.0), "free")
    right = Window((5.0, 10.0), "free", (5.0, 0.0))
    x, y = [], []
    for k in range(1500):
        c = sample_poisson(w, 1.0, k)
        x.append(len(c.restrict(left)))
        y.append(len(c.restrict(right)))
    rho = np.corrcoef(x, y)[0, 1]
    assert abs(rho) < 3 / math.sqrt(1500)


@pytest.mark.parametrize("kind", ["poisson", "lattice", "jittered"])
def test_density_converges_to_one(kind):
    w = Window.cube(110.0, 2)
    if kind == "poisson":
        c = sample_poisson(w, 1.0, 1)
    elif kind == "lattice":
        c = lattice_points(w)
    else:
        c = jittered_lattice(w, 0.4, 1)
    for vol in (1e2, 1e3, 1e4):
        side = math.sqrt(vol)
        rho = empirical_density(c, Window.cube(side, 2, "free"))
        # Poisson 3 sigma; lattice and jittered have boundary error O(perimeter / volume)
        bound = 3 / math.sqrt(vol) if kind == "poisson" else 4 * side / vol + 1e-12
        assert abs(rho - 1) <= bound, (kind, vol, rho)


def test_lattice_points_exact():
    w = Window((3.0, 2.5), "free", (-0.5, 0.0))
    c = lattice_points(w)
    expect = [(x, y) for x in (0, 1, 2) for y in (0, 1, 2)]
    assert [tuple(p) for p in c.points.astype(int)] == expect
    assert np.array_equal(c.points, np.round(c.points))


def test_jitter_requires_torus_and_stays_close():
    with pytest.raises(InvalidConfigError):
        jittered_lattice(Window.cube(4.0, 2, "free"), 0.2, 0)
    w = Window.cube(10.0, 2)
    c = jittered_lattice(w, 0.3, 0)
    base = lattice_points(w).points
    d = displacement(base, c.points, w)
    assert np.abs(d).max() <= 0.3
    assert w.contains(c.points).all()


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0.5, 50))
def test_min_image_range(delta, side):
    m = float(min_image(np.array([delta]), np.array([side]))[0])
    assert -side / 2 - 1e-9 <= m <= side / 2 + 1e-9
    k = (delta - m) / side
    assert abs(k - round(k)) < 1e-6


def test_displacement_free_vs_torus():
    p, q = np.array([0.5, 0.5]), np.array([9.5, 0.5])
    assert np.allclose(displacement(p, q, Window.cube(10.0, 2)), [-1.0, 0.0])
    assert np.allclose(displacement(p, q, Window.cube(10.0, 2, "free")), [9.0, 0.0])


def test_restrict_keeps_ids():
    c = sample_poisson(Window.cube(10.0, 2), 1.0, 2)
    sub = c.restrict(Window((5.0, 5.0), "free"))
    assert np.array_equal(c.points[sub.ids], sub.points)


def test_d1_warns():
    with pytest.warns(UserWarning):
        sample_poisson(Window.cube(10.0, 1), 1.0, 0)
