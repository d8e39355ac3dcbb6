"""Uniform time grid on [0, T], trapezoid quadrature and difference operators.

Only interior nodes ``t_i = i*dt`` (``i = 1..N``, ``dt = T/(N+1)``) are
unknowns. Endpoint values are data carried by :class:`Trajectory`, so every
difference operator comes as an interior block plus a boundary vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

MIN_NODES = 8


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise ConfigurationError(f"duration T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise ConfigurationError(f"need at least {MIN_NODES} interior nodes, got N={self.N}")

    @property
    def dt(self) -> float:
        return self.T / (self.N + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        t = self.dt * np.arange(1, self.N + 1)
        t.flags.writeable = False
        return t

    @cached_property
    def weights(self) -> np.ndarray:
        # Trapezoid rule; the dt/2 endpoint weights live in quadrature(boundary=...).
        w = np.full(self.N, self.dt)
        w.flags.writeable = False
        return w

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[0] != self.N:
            raise ConfigurationError(f"expected {self.N} grid values, got {f.shape[0]}")
        return f


def make_grid(T: float, N: int) -> TimeGrid:
    return TimeGrid(float(T), int(N))


def quadrature(f, grid: TimeGrid, boundary: tuple[complex, complex] | None = None):
    """Trapezoid rule over the grid.

    Without ``boundary`` only interior nodes contribute, so a constant
    integrates to ``T - dt``. Passing the endpoint values ``(f(0), f(T))``
    adds the ``dt/2`` end weights and gives the full trapezoid rule.
    """
    f = grid._check(f)
    total = np.dot(grid.weights, f)
    if boundary is not None:
        f0, fT = boundary
        total = total + 0.5 * grid.dt * (f0 + fT)
    return total


@dataclass(frozen=True)
class GridMatrix:
    """An N x N operator on interior values, applied as a plain matrix product."""

    grid: TimeGrid
    values: np.ndarray | sp.spmatrix

    def __post_init__(self):
        if self.values.shape != (self.grid.N, self.grid.N):
            raise ConfigurationError(
                f"matrix shape {self.values.shape} does not match grid N={self.grid.N}"
            )

    def __matmul__(self, f):
        return self.values @ np.asarray(f)

    def toarray(self) -> np.ndarray:
        if sp.issparse(self.values):
            return self.values.toarray()
        return np.asarray(self.values)

    def diagonals(self) -> tuple[np.ndarray, np.ndarray]:
        """Main and first off-diagonal, for symmetric tridiagonal operators."""
        m = sp.csr_matrix(self.values) if not sp.issparse(self.values) else self.values.tocsr()
        return np.asarray(m.diagonal(0)), np.asarray(m.diagonal(1))


def diff_matrix(grid: TimeGrid, order: int, left=0.0, right=0.0):
    """Central second-order difference operator with Dirichlet closure.

    Returns ``(D, b)`` such that the derivative of a function with interior
    samples ``f`` and endpoint values ``left``, ``right`` is ``D @ f + b``.
    """
    N, dt = grid.N, grid.dt
    b = np.zeros(N, dtype=np.result_type(left, right, float))
    if order == 1:
        off = np.full(N - 1, 1.0 / (2 * dt))
        D = sp.diags([-off, off], [-1, 1], format="csr")
        b[0] = -left / (2 * dt)
        b[-1] = right / (2 * dt)
    elif order == 2:
        D = sp.diags(
            [np.full(N - 1, 1.0), np.full(N, -2.0), np.full(N - 1, 1.0)], [-1, 0, 1], format="csr"
        ) / dt**2
        b[0] = left / dt**2
        b[-1] = right / dt**2
    else:
        raise ConfigurationError(f"unsupported derivative order {order}; use 1 or 2")
    return GridMatrix(grid, D), b


def derivative(f, grid: TimeGrid, order: int = 1, left=0.0, right=0.0) -> np.ndarray:
    D, b = diff_matrix(grid, order, left, right)
    return D @ grid._check(f) + b


@dataclass(frozen=True)
class Trajectory:
    """Interior samples of q(t) together with the fixed endpoint values."""

    grid: TimeGrid
    q: np.ndarray
    q0: float = 0.0
    qT: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.grid.N,):
            raise ConfigurationError(f"trajectory needs {self.grid.N} interior values, got {q.shape}")
        object.__setattr__(self, "q", q)

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "Trajectory":
        return cls(grid, func(grid.nodes), float(func(0.0)), float(func(grid.T)))

    @property
    def velocity(self) -> np.ndarray:
        return derivative(self.q, self.grid, 1, self.q0, self.qT)

    @property
    def acceleration(self) -> np.ndarray:
        return derivative(self.q, self.grid, 2, self.q0, self.qT)

    def velocity_endpoints(self) -> tuple[float, float]:
        """One-sided second-order estimates of q'(0) and q'(T)."""
        q, dt = self.q, self.grid.dt
        v0 = (-3 * self.q0 + 4 * q[0] - q[1]) / (2 * dt)
        vT = (3 * self.qT - 4 * q[-1] + q[-2]) / (2 * dt)
        return v0, vT

    def acceleration_endpoints(self) -> tuple[float, float]:
        """One-sided second-order estimates of q''(0) and q''(T)."""
        q, dt = self.q, self.grid.dt
        a0 = (2 * self.q0 - 5 * q[0] + 4 * q[1] - q[2]) / dt**2
        aT = (2 * self.qT - 5 * q[-1] + 4 * q[-2] - q[-3]) / dt**2
        return a0, aT
