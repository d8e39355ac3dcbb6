import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpla import canonical as cn
from qpla.classical import lagrangian_action
from qpla.errors import ConfigurationError
from qpla.puoperator import PUParams
from qpla.timegrid import Trajectory, make_grid

G = make_grid(1.0, 2000)
P01 = PUParams(0.1, 1.0)


def lam(n, r, T=1.0):
    return 1 - (n * math.pi * r / T) ** 2


def sine_velocity_traj(grid, n):
    return cn.random_sine_trajectory(grid, np.eye(n)[n - 1])


@pytest.mark.parametrize("n", [1, 3])
def test_momentum_of_sine_velocity(n):
    traj = sine_velocity_traj(G, n)
    p = cn.momentum_from_velocity(traj, P01)
    v = np.sin(n * math.pi * G.nodes)
    assert np.max(np.abs(p.values - lam(n, 0.1) * v)) < 1e-4


def test_momentum_harmonic_limit_and_constant():
    traj = sine_velocity_traj(G, 2)
    p = cn.momentum_from_velocity(traj, PUParams(0.0, 1.0))
    np.testing.assert_array_equal(p.values, traj.velocity)
    const = Trajectory(G, np.full(G.N, 3.0), 3.0, 3.0)
    assert np.max(np.abs(cn.momentum_from_velocity(const, P01).values)) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 4])
def test_velocity_from_eigen_momentum(n):
    v = np.sin(n * math.pi * G.nodes)
    p = cn.MomentumTrajectory(G, lam(n, 0.1) * v)
    assert np.max(np.abs(cn.velocity_from_momentum(p, P01) - v)) < 1e-4


def test_velocity_homogeneous_part():
    r = 2 / math.pi  # omega T = pi/2
    params = PUParams(r, 1.0)
    p = cn.MomentumTrajectory(G, np.zeros(G.N), 1.0, 1.0)
    w = 1 / r
    expected = np.cos(w * G.nodes) + np.sin(w * G.nodes)
    np.testing.assert_allclose(cn.velocity_from_momentum(p, params), expected, atol=1e-12)
    zero = cn.MomentumTrajectory(G, np.zeros(G.N))
    assert not np.any(cn.velocity_from_momentum(zero, P01))


def test_round_trip():
    traj = cn.random_sine_trajectory(G, [0.3, -0.7, 0.2, 0.1, -0.4])
    p = cn.momentum_from_velocity(traj, P01)
    back = cn.velocity_from_momentum(p, P01)
    assert np.max(np.abs(back - traj.velocity)) < 1e-4


def test_hamilton_functional_examples():
    q = Trajectory.from_function(G, lambda t: np.sin(math.pi * np.asarray(t)))
    zero_p = cn.MomentumTrajectory(G, np.zeros(G.N))
    assert cn.hamilton_functional(q, zero_p, P01) == pytest.approx(0.25, abs=1e-6)
    q0 = Trajectory(G, np.zeros(G.N))
    assert cn.hamilton_functional(q0, zero_p, P01) == 0.0
    traj = sine_velocity_traj(G, 1)
    p = cn.momentum_from_velocity(traj, P01)
    H = cn.hamilton_functional(q0, p, P01)
    assert 2 * H == pytest.approx(lam(1, 0.1) * 0.5, rel=1e-5)


def test_hamilton_functional_needs_zero_end_velocity():
    q = Trajectory(G, np.zeros(G.N))
    with pytest.raises(ConfigurationError):
        cn.hamilton_functional(q, cn.MomentumTrajectory(G, np.zeros(G.N), 1.0, 0.0), P01)


def test_hamilton_functional_time_reversal_symmetry():
    q = Trajectory.from_function(G, lambda t: np.sin(math.pi * np.asarray(t)))
    rng = np.random.default_rng(3)
    p = cn.MomentumTrajectory(G, rng.normal(size=G.N))
    flipped = cn.MomentumTrajectory(G, -p.values[::-1])
    assert cn.hamilton_functional(q, flipped, P01) == pytest.approx(cn.hamilton_functional(q, p, P01), rel=1e-10)


def test_canonical_action_constant_q():
    q = Trajectory(G, np.full(G.N, 2.0), 2.0, 2.0)
    zero_p = cn.MomentumTrajectory(G, np.zeros(G.N))
    assert cn.canonical_action(q, zero_p, P01) == pytest.approx(-0.5 * 4 * 1.0, rel=1e-12)
    assert lagrangian_action(q, P01) == pytest.approx(-2.0, rel=1e-12)


def test_canonical_harmonic_limit():
    params = PUParams(0.0, 1.0)
    q = cn.random_sine_trajectory(G, [0.5, 0.2, -0.3])
    p = cn.momentum_from_velocity(q, params)
    assert cn.canonical_action(q, p, params) == pytest.approx(lagrangian_action(q, params), rel=1e-5)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=5, max_size=5), st.sampled_from([0.0, 0.01, 0.03]))
def test_legendre_consistency_property(coeffs, r):
    if max(abs(c) for c in coeffs) < 0.1:
        return
    grid = make_grid(1.0, 2000)
    params = PUParams(r, 1.0)
    q = cn.random_sine_trajectory(grid, coeffs)
    p = cn.momentum_from_velocity(q, params)
    lag = lagrangian_action(q, params)
    can = cn.canonical_action(q, p, params)
    scale = max(abs(lag), 0.5 * float(np.dot(grid.weights, q.velocity**2)))
    assert abs(can - lag) <= 1e-5 * scale
