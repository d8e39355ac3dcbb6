"""Canonical structure on trajectory space: momentum p = L q', its inverse,
the Hamilton functional and the canonical action."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .puoperator import GridKernel, PUParams, green_kernel_analytic, green_kernel_numeric
from .timegrid import TimeGrid, Trajectory, derivative, quadrature


@dataclass(frozen=True)
class MomentumTrajectory:
    grid: TimeGrid
    values: np.ndarray
    v0: float = 0.0
    vT: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.values, dtype=float)
        if p.shape != (self.grid.N,):
            raise ConfigurationError(f"momentum needs {self.grid.N} values, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ConfigurationError("momentum values must be finite")
        object.__setattr__(self, "values", p)


def momentum_from_velocity(
    traj: Trajectory, params: PUParams, v0: float = 0.0, vT: float = 0.0
) -> MomentumTrajectory:
    """p = q' + r^2 q''', the third derivative taken as D2 of the velocity with end data (v0, vT)."""
    v = traj.velocity
    p = v + params.r**2 * derivative(v, traj.grid, 2, v0, vT)
    return MomentumTrajectory(traj.grid, p, v0, vT)


def velocity_from_momentum(
    p: MomentumTrajectory, params: PUParams, v0: float | None = None, vT: float | None = None
) -> np.ndarray:
    """Invert p = L q' with velocity end data (v0, vT) using the analytic kernel."""
    v0 = p.v0 if v0 is None else v0
    vT = p.vT if vT is None else vT
    grid = p.grid
    K = green_kernel_analytic(grid, params)
    particular = K.apply(p.values)
    if params.r == 0:
        return particular
    w, t, T = params.omega, grid.nodes, grid.T
    homogeneous = v0 * np.cos(w * t) + np.sin(w * t) / math.sin(w * T) * (vT - v0 * math.cos(w * T))
    return homogeneous + particular


def _inner(f, g, grid: TimeGrid) -> float:
    return float(quadrature(np.asarray(f) * np.asarray(g), grid))


def _default_kernel(grid: TimeGrid, params: PUParams) -> GridKernel:
    # The discrete inverse of the same L that builds p, so K o p returns q' exactly.
    return green_kernel_numeric(grid, params)


def hamilton_functional(
    q: Trajectory, p: MomentumTrajectory, params: PUParams, kernel: GridKernel | None = None
) -> float:
    """H = (<p, K o p> + <q, q>)/2, the q^2 term with trapezoid end weights."""
    if p.v0 != 0 or p.vT != 0:
        raise ConfigurationError("the Hamilton functional assumes zero velocity at both ends")
    K = _default_kernel(q.grid, params) if kernel is None else kernel
    kinetic = _inner(p.values, K.apply(p.values), q.grid)
    potential = float(quadrature(q.q**2, q.grid, boundary=(q.q0**2, q.qT**2)))
    return 0.5 * (kinetic + potential)


def canonical_action(
    q: Trajectory, p: MomentumTrajectory, params: PUParams, kernel: GridKernel | None = None
) -> float:
    """<q', p> - H[q, p]; the endpoint terms of <q', p> vanish with v0 = vT = 0."""
    return _inner(q.velocity, p.values, q.grid) - hamilton_functional(q, p, params, kernel)


def random_sine_trajectory(grid: TimeGrid, coeffs) -> Trajectory:
    """Trajectory whose velocity is sum_n c_n sin(n pi t/T), so q'(0) = q'(T) = 0."""
    c = np.asarray(coeffs, dtype=float)
    n = np.arange(1, c.size + 1)
    T = grid.T

    def q(t):
        t = np.asarray(t, dtype=float)
        k = n * math.pi / T
        return -np.sum((c / k)[:, None] * np.cos(np.multiply.outer(k, np.atleast_1d(t))), axis=0).reshape(t.shape)

    return Trajectory.from_function(grid, q)
