import numpy as np
import pytest

from exitmc import model
from exitmc.model import ExitTimeProfile, discount_increment, make_cube_problem


def test_cube_problem_center():
    spec = make_cube_problem(1.0, 3, 1.0, np.zeros(3))
    assert bool(spec.domain.contains(np.zeros(3)))
    assert spec.domain.boundary_distance(np.zeros(3)) == pytest.approx(1.0)


def test_cube_boundary_excluded():
    spec = make_cube_problem(1.0, 3, 1.0, np.zeros(3))
    assert not bool(spec.domain.contains(np.array([1.0, 0.0, 0.0])))
    assert not bool(spec.domain.contains(np.array([0.2, -1.0, 0.0])))


def test_cube_normal_dominant_coordinate():
    spec = make_cube_problem(1.0, 3, 1.0, np.zeros(3))
    n = spec.domain.boundary_normal(np.array([0.9, 0.1, -0.2]))
    assert np.allclose(n, [1.0, 0.0, 0.0])
    n = spec.domain.boundary_normal(np.array([0.1, -0.8, 0.2]))
    assert np.allclose(n, [0.0, -1.0, 0.0])
    # tie broken by lowest index
    n = spec.domain.boundary_normal(np.array([0.5, -0.5, 0.5]))
    assert np.allclose(n, [1.0, 0.0, 0.0])


def test_start_must_be_interior():
    with pytest.raises(ValueError):
        make_cube_problem(1.0, 3, 1.0, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        make_cube_problem(1.0, 3, 1.0, np.array([0.0, 2.0, 0.0]))


def test_horizon_positive():
    with pytest.raises(ValueError):
        make_cube_problem(1.0, 3, 0.0, np.zeros(3))


def test_discount_increment_zero_potential():
    fk = ExitTimeProfile.terminal_clock()
    assert discount_increment(fk, np.zeros(3), 0.3, 0.1) == pytest.approx(1.0)


def test_discount_increment_constant_potential():
    fk = model.FeynmanKacData(
        running=lambda x, t: np.zeros(np.shape(x)[:-1]),
        terminal=lambda x, t: np.zeros(np.shape(x)[:-1]),
        potential=lambda x, t: 2.0 * np.ones(np.shape(x)[:-1]),
    )
    assert discount_increment(fk, np.zeros(3), 0.0, 0.5) == pytest.approx(np.exp(-1.0))


def test_discount_increment_left_endpoint_rule():
    fk = model.FeynmanKacData(
        running=lambda x, t: np.zeros(np.shape(x)[:-1]),
        terminal=lambda x, t: np.zeros(np.shape(x)[:-1]),
        potential=lambda x, t: np.broadcast_to(np.asarray(t, float), np.shape(x)[:-1]),
    )
    # V evaluated at the left endpoint t=0.3 over a step of h=0.1
    assert discount_increment(fk, np.ones(3), 0.3, 0.1) == pytest.approx(np.exp(-0.03))


def test_discount_increment_rejects_nonpositive_h():
    with pytest.raises(ValueError):
        discount_increment(ExitTimeProfile.terminal_clock(), np.zeros(3), 0.0, 0.0)


@pytest.mark.parametrize("preset", ["cube3d", "ball3d"])
def test_geometry_consistency_walk_to_boundary(preset):
    spec = model.problem_preset(preset)
    rand = np.random.default_rng(7)
    for _ in range(200):
        x = rand.uniform(-0.99, 0.99, 3)
        if not spec.domain.contains(x):
            continue
        d = spec.domain.boundary_distance(x)
        n = spec.domain.boundary_normal(x)
        y = x + d * n
        assert abs(spec.domain.boundary_distance(y)) < 1e-9


@pytest.mark.parametrize("preset", ["cube3d", "ball3d", "cube1d"])
def test_boundary_normal_is_unit(preset):
    spec = model.problem_preset(preset)
    rand = np.random.default_rng(3)
    x = rand.uniform(-1.2, 1.2, size=(500, spec.dim))
    n = spec.domain.boundary_normal(x)
    assert np.all(np.abs(np.linalg.norm(n, axis=-1) - 1.0) < 1e-12)


def test_geometry_batch_shapes():
    spec = model.problem_preset("cube3d")
    x = np.random.default_rng(0).uniform(-1, 1, size=(50, 3))
    assert spec.domain.contains(x).shape == (50,)
    assert spec.domain.boundary_distance(x).shape == (50,)
    assert spec.domain.boundary_normal(x).shape == (50, 3)


def test_cube_distance_outside():
    spec = model.problem_preset("cube3d")
    assert spec.domain.boundary_distance(np.array([1.5, 0.0, 0.0])) == pytest.approx(0.5)
    assert spec.domain.boundary_distance(np.array([1.3, 1.4, 0.0])) == pytest.approx(0.5)


def test_exit_time_profile_variants():
    x = np.zeros((4, 3))
    t = np.array([0.1, 0.2, 0.3, 0.4])
    g_clock = ExitTimeProfile.terminal_clock()
    assert np.allclose(g_clock.running(x, t), 0.0)
    assert np.allclose(g_clock.terminal(x, t), t)
    assert np.allclose(g_clock.potential(x, t), 0.0)
    f_clock = ExitTimeProfile.running_clock()
    assert np.allclose(f_clock.running(x, t), 1.0)
    assert np.allclose(f_clock.terminal(x, t), 0.0)
    with pytest.raises(ValueError):
        ExitTimeProfile.make("bogus")


def test_preset_registry():
    for name in model.PRESET_NAMES:
        spec = model.problem_preset(name)
        assert bool(spec.domain.contains(spec.start))
    with pytest.raises(ValueError):
        model.problem_preset("torus9d")


def test_ball_normal_at_center_is_deterministic():
    spec = model.problem_preset("ball3d")
    n = spec.domain.boundary_normal(np.zeros(3))
    assert np.allclose(n, [1.0, 0.0, 0.0])
