"""Classical Pais-Uhlenbeck dynamics in Ostrogradsky's first-order form.

Phase-space ordering for array work is ``(q, y, p_q, p_y)``, optionally with
the multiplier ``lam`` appended as a fifth component.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .puoperator import PUParams
from .timegrid import Trajectory, quadrature


@dataclass(frozen=True)
class OstrogradskyState:
    q: float
    y: float
    p_q: float
    p_y: float
    lam: float | None = None
    p_lam: float | None = None

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.y, self.p_q, self.p_y], dtype=float)

    @classmethod
    def from_array(cls, x) -> "OstrogradskyState":
        return cls(*(float(v) for v in x[:4]))

    def on_constraint_surface(self, tol: float = 1e-10) -> bool:
        """Both multiplier constraints hold: p_lam = 0 and y = p_q + lam."""
        if self.lam is None:
            return False
        res = constraint_residuals(self, self.lam)
        return abs(res["p_lam"]) <= tol and abs(res["primary"]) <= tol


def lagrangian_action(traj: Trajectory, params: PUParams) -> float:
    """Trapezoid quadrature of (q'^2 - r^2 q''^2 - q^2)/2 including the endpoints."""
    r2 = params.r**2
    v, a = traj.velocity, traj.acceleration
    (v0, vT), (a0, aT) = traj.velocity_endpoints(), traj.acceleration_endpoints()
    f = v**2 - r2 * a**2 - traj.q**2
    f0 = v0**2 - r2 * a0**2 - traj.q0**2
    fT = vT**2 - r2 * aT**2 - traj.qT**2
    return 0.5 * float(quadrature(f, traj.grid, boundary=(f0, fT)))


def _require_r(params: PUParams) -> float:
    if params.r == 0:
        raise ConfigurationError(
            "the Ostrogradsky Hamiltonian divides by r^2; use harmonic_limit_hamiltonian for r = 0"
        )
    return params.r


def _energy(x: np.ndarray, r: float) -> np.ndarray:
    q, y, pq, py = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return -0.5 * (py**2 / r**2 + y**2) + 0.5 * q**2 + y * pq


def _flow(x: np.ndarray, r: float) -> np.ndarray:
    q, y, pq, py = x[0], x[1], x[2], x[3]
    dq, dy, dpq, dpy = y, -py / r**2, -q, y - pq
    if x.shape[0] == 5:
        # d/dt of lam = y - p_q, so that y - (p_q + lam) is conserved
        return np.array([dq, dy, dpq, dpy, dy - dpq])
    return np.array([dq, dy, dpq, dpy])


def ostro_hamiltonian(state: OstrogradskyState, params: PUParams) -> float:
    return float(_energy(state.as_array(), _require_r(params)))


def ostro_flow(state: OstrogradskyState, params: PUParams) -> OstrogradskyState:
    """Hamilton's equations, returned as a state of time derivatives."""
    return OstrogradskyState.from_array(_flow(state.as_array(), _require_r(params)))


@dataclass(frozen=True)
class ClassicalRun:
    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray
    growth: float

    @property
    def energy_drift(self) -> float:
        """max |h(t) - h(0)| / max(1, |h(0)|)."""
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(1.0, abs(e0)))

    @property
    def multiplier(self) -> np.ndarray | None:
        return self.states[:, 4] if self.states.shape[1] == 5 else None


def integrate(
    state0: OstrogradskyState,
    params: PUParams,
    dt: float,
    steps: int,
    sample_every: int = 1,
    track_multiplier: bool = False,
) -> ClassicalRun:
    """Classical RK4. Exponential ghost growth is reported through ``growth``."""
    r = _require_r(params)
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if steps < 0 or sample_every < 1:
        raise ConfigurationError("steps must be >= 0 and sample_every >= 1")
    x = state0.as_array()
    if track_multiplier:
        lam = state0.lam if state0.lam is not None else x[1] - x[2]
        x = np.append(x, lam)
    n_out = steps // sample_every + 1
    out = np.empty((n_out, x.shape[0]))
    out[0] = x
    h = dt
    k = 1
    # overflow is caught below as a non-finite state
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, steps + 1):
            k1 = _flow(x, r)
            k2 = _flow(x + 0.5 * h * k1, r)
            k3 = _flow(x + 0.5 * h * k2, r)
            k4 = _flow(x + h * k3, r)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if step % sample_every == 0:
                if not np.all(np.isfinite(x)):
                    raise NumericalError(f"non-finite state at step {step}")
                out[k] = x
                k += 1
    times = dt * sample_every * np.arange(n_out)
    scale0 = max(np.max(np.abs(out[0, :4])), np.finfo(float).tiny)
    growth = float(np.max(np.abs(out[:, :4])) / scale0)
    return ClassicalRun(times, out, _energy(out, r), growth)


def constraint_residuals(
    state: OstrogradskyState, lam: float | None = None, local_limit: bool = False
) -> dict[str, float]:
    """Residuals of p_lam = 0, y = p_q + lam, and (local limit) y = p_q, p_y = 0."""
    lam = (state.lam or 0.0) if lam is None else lam
    res = {
        "p_lam": 0.0 if state.p_lam is None else state.p_lam,
        "primary": state.y - (state.p_q + lam),
        "secondary": state.y - state.p_q,
    }
    if local_limit:
        res["p_y"] = state.p_y
    return res


def harmonic_limit_hamiltonian(q: float, p_q: float) -> float:
    return 0.5 * (p_q**2 + q**2)


def normal_frequencies(params: PUParams) -> tuple[float, float]:
    """Positive roots of r^2 W^4 - W^2 + 1 = 0 (slow, fast); requires r < 1/2."""
    r = _require_r(params)
    disc = 1.0 - 4.0 * r**2
    if disc < 0:
        raise ConfigurationError("r >= 1/2: the normal frequencies are complex")
    s = math.sqrt(disc)
    return math.sqrt((1 - s) / (2 * r**2)), math.sqrt((1 + s) / (2 * r**2))
