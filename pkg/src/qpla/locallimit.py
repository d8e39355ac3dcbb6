"""Correspondence with the ordinary harmonic oscillator as r -> 0."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError, NumericalError
from .groundstate import kernel_residual, ground_state, solve_M
from .puoperator import PUParams, trace_inv_sqrt
from .timegrid import make_grid

ALPHA_PI2 = 1.0 / math.pi**2
MIN_CALIBRATION_MODES = 10


def hbar_tilde(alpha: float, r: float, hbar: float = 1.0) -> float:
    """Scaled action constant alpha * r * hbar."""
    if alpha <= 0 or hbar <= 0 or r < 0:
        raise ConfigurationError("hbar_tilde needs alpha > 0, hbar > 0, r >= 0")
    return alpha * r * hbar


def log_ho_ground_state(t: float, q: float, hbar: float = 1.0) -> complex:
    """log psi_0(t, q) = -i t/2 - q^2/(2 hbar), normalization dropped."""
    return complex(-0.5j * t - q**2 / (2 * hbar))


def reference_lambda_ho(T: float, q0: float, qT: float, hbar: float = 1.0) -> complex:
    """Action eigenvalue (hbar/i)[log psi_0(T, qT) - log psi_0(0, q0)]."""
    return (hbar / 1j) * (log_ho_ground_state(T, qT, hbar) - log_ho_ground_state(0.0, q0, hbar))


def boundary_phase(q0: float, qT: float) -> complex:
    return 0.5j * (qT**2 - q0**2)


@dataclass(frozen=True)
class AlphaCalibration:
    alpha_star: float
    alpha_pi2: float
    n_c: int
    trace_real: float

    @property
    def ratio(self) -> float:
        return self.alpha_star / self.alpha_pi2


def calibrate_alpha(params: PUParams) -> AlphaCalibration:
    """alpha* = T / (r Re S) with S the trace series cut at the critical index.

    This is the alpha for which Re Lambda = -hbar T / 2.
    """
    if not params.r > 0:
        raise ConfigurationError("alpha calibration needs r > 0")
    n_c = params.critical_index
    if n_c < MIN_CALIBRATION_MODES:
        raise ConfigurationError(
            f"r = {params.r} leaves only {n_c} positive modes; calibration needs "
            f"at least {MIN_CALIBRATION_MODES} (use a smaller r or set alpha explicitly)"
        )
    S = trace_inv_sqrt(params, n_c)
    if S.real <= 0:
        raise NumericalError(f"trace series is not positive: {S.real}")
    return AlphaCalibration(params.T / (params.r * S.real), ALPHA_PI2, n_c, S.real)


@dataclass(frozen=True)
class SweepEntry:
    r: float
    N_lambda: int
    N_residual: int
    n_max: int
    Lambda: complex
    Lambda_with_phase: complex
    Lambda_ref: complex
    deviation: float
    D: float


@dataclass(frozen=True)
class CorrespondenceReport:
    T: float
    hbar: float
    q0: float
    qT: float
    alpha_star: float
    alpha_pi2: float
    entries: list[SweepEntry] = field(default_factory=list)

    @property
    def deviations(self) -> list[float]:
        return [e.deviation for e in self.entries]

    @property
    def monotone(self) -> bool:
        """Deviation does not grow as r decreases (entries are ordered by r descending)."""
        d = self.deviations
        return all(b <= a for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        def enc(v):
            return {"re": v.real, "im": v.imag} if isinstance(v, complex) else v

        return {
            "schema_version": 1,
            "T": self.T,
            "hbar": self.hbar,
            "q0": self.q0,
            "qT": self.qT,
            "alpha_star": self.alpha_star,
            "alpha_pi2": self.alpha_pi2,
            "monotone": self.monotone,
            "entries": [{k: enc(v) for k, v in asdict(e).items()} for e in self.entries],
        }


def resolved_grid_size(r: float, T: float, N: int, points_per_r: int) -> int:
    """Grid size that keeps at least ``points_per_r`` nodes per time r."""
    return max(N, math.ceil(points_per_r * T / r))


def convergence_sweep(
    r_list,
    T: float = 1.0,
    q0: float = 0.0,
    qT: float = 0.0,
    hbar: float = 1.0,
    *,
    N: int = 2000,
    points_per_r: int = 16,
    residuals: bool = True,
) -> CorrespondenceReport:
    """Lambda(r) against the oscillator reference with alpha fixed at alpha*(min r).

    Lambda is computed with q0 = qT = 0 on a grid resolving r, and the
    boundary phase is added analytically. The kernel-equation derivative
    residual D is measured on the fixed N-point grid.
    """
    rs = sorted({float(r) for r in r_list}, reverse=True)
    if not rs or rs[-1] <= 0:
        raise ConfigurationError("r_list must contain positive values")
    cal = calibrate_alpha(PUParams(rs[-1], T, hbar))
    ref = reference_lambda_ho(T, q0, qT, hbar)
    entries = []
    for r in rs:
        params = PUParams(r, T, hbar, alpha=cal.alpha_star)
        params.check_resonance()
        n_lam = resolved_grid_size(r, T, N, points_per_r)
        gs = ground_state(
            make_grid(T, n_lam), params, n_modes=params.cutoff(n_lam), residuals=False
        )
        lam = gs.Lambda
        D = math.nan
        if residuals:
            grid = make_grid(T, N)
            D = kernel_residual(solve_M(grid, params), params).D
        entries.append(
            SweepEntry(
                r=r,
                N_lambda=n_lam,
                N_residual=N,
                n_max=gs.n_max,
                Lambda=lam,
                Lambda_with_phase=lam + boundary_phase(q0, qT),
                Lambda_ref=ref,
                deviation=abs(lam.real - ref.real) / abs(ref.real),
                D=D,
            )
        )
    return CorrespondenceReport(T, hbar, q0, qT, cal.alpha_star, ALPHA_PI2, entries)
