"""Gaussian ground state of the action operator.

The wave functional is

    Psi[q] = A exp(-<q, M o q>/(2 hbt) + i <k, q>/hbt)

with ``hbt`` the scaled action constant. The kernel equation splits into a
quadratic part, solved exactly by the principal root ``M = sqrt(L)``, and a
diagonal-derivative part that is measured rather than imposed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConditioningError, ConfigurationError, PoleError
from .puoperator import (
    POLE_GUARD,
    GridKernel,
    PUParams,
    SpectralKernel,
    delta_kernel,
    green_kernel_numeric,
    operator_function,
    principal_sqrt,
    spectrum,
)
from .timegrid import TimeGrid, Trajectory, diff_matrix

COND_GUARD = 1e-12


def _weights(M: GridKernel) -> np.ndarray:
    return M.grid.weights


def solve_M(grid: TimeGrid, params: PUParams, n_max: int | None = None) -> SpectralKernel:
    """Principal solution M = sqrt(L) on the leading ``n_max`` modes (all N by default)."""
    spec = spectrum(grid, params, n_max)
    lam = spec.eigenvalues
    i = int(np.argmin(np.abs(lam)))
    if abs(lam[i]) <= POLE_GUARD:
        raise PoleError(f"lambda_{i + 1} = {lam[i]:.3e} is too close to zero for sqrt(L)^-1")
    return operator_function(spec, principal_sqrt)


# ---------------------------------------------------------------------------
# kernel equation residual


@dataclass(frozen=True)
class KernelResidual:
    """Norms of R = (M o K o M)/2 - delta/2 - (i/2)(d_u + d_v) M.

    ``*_max`` are max |R_ij| w (matrix-element scale), ``*_l2`` are
    sqrt(sum_ij w_i w_j |R_ij|^2). ``quadratic_*`` measure (M o K o M - P)/2
    with P the projector on the retained modes (delta when all are kept);
    ``derivative_*`` measure (d_u + d_v) M on its own.
    """

    max_norm: float
    l2_norm: float
    quadratic_max: float
    derivative_max: float
    derivative_l2: float

    @property
    def D(self) -> float:
        return self.derivative_l2


def _mode_projector(M: GridKernel) -> np.ndarray:
    if isinstance(M, SpectralKernel) and M.rank < M.grid.N:
        return M.modes @ M.modes.T
    return np.diag(1.0 / _weights(M))


def _sym_derivative(M: GridKernel) -> np.ndarray:
    """(d_u + d_v) M with zero boundary rows (Dirichlet modes vanish at the ends)."""
    D1 = diff_matrix(M.grid, 1)[0].values
    X = M.values
    return D1 @ X + (D1 @ X.T).T


def kernel_residual(M: GridKernel, params: PUParams, K: GridKernel | None = None) -> KernelResidual:
    grid = M.grid
    K = green_kernel_numeric(grid, params) if K is None else K
    w = grid.weights
    MKM = M.apply(K.apply(M.values))
    quad = 0.5 * (MKM - _mode_projector(M))
    deriv = _sym_derivative(M)
    R = 0.5 * MKM - 0.5 * np.diag(1.0 / w) - 0.5j * deriv
    ww = np.outer(w, w)
    return KernelResidual(
        max_norm=float(np.max(np.abs(R)) * grid.dt),
        l2_norm=float(np.sqrt(np.sum(ww * np.abs(R) ** 2))),
        quadratic_max=float(np.max(np.abs(quad)) * grid.dt),
        derivative_max=float(np.max(np.abs(deriv)) * grid.dt),
        derivative_l2=float(np.sqrt(np.sum(ww * np.abs(deriv) ** 2))),
    )


# ---------------------------------------------------------------------------
# source equation


def _free_derivative(grid: TimeGrid) -> sp.csr_matrix:
    """First derivative needing no end data: central inside, one-sided second order at the ends."""
    N, h = grid.N, grid.dt
    D = sp.lil_matrix((N, N))
    for i in range(1, N - 1):
        D[i, i - 1], D[i, i + 1] = -0.5 / h, 0.5 / h
    D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    D[N - 1, N - 3 : N] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return D.tocsr()


def boundary_rows(M: GridKernel) -> tuple[np.ndarray, np.ndarray]:
    """M(0, u) and M(T, u) from extending every mode to the endpoints.

    Each mode is an eigenvector of the second-difference matrix; its
    three-term recurrence fixes the value one step outside the grid, which
    is zero up to rounding for Dirichlet modes.
    """
    if not isinstance(M, SpectralKernel):
        raise ConfigurationError("boundary rows need a kernel built from modes")
    V, h = M.modes, M.grid.dt
    w = M.grid.weights
    D2 = diff_matrix(M.grid, 2)[0].values
    mu = np.einsum("in,in->n", V, w[:, None] * (D2 @ V))
    # (v_0 - 2 v_1 + v_2)/h^2 = mu v_1  =>  v_0 = mu h^2 v_1 + 2 v_1 - v_2
    v_left = mu * h**2 * V[0] + 2 * V[0] - V[1]
    v_right = mu * h**2 * V[-1] + 2 * V[-1] - V[-2]
    return V @ (M.coeffs * v_left), V @ (M.coeffs * v_right)


def source_system(
    M: GridKernel, params: PUParams, q0: float, qT: float, K: GridKernel | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Matrix A and right-hand side b of the discretized source equation A k = b.

    The equation is -i (M^T o K o k)(u) + i [qT M(T,u) - q0 M(0,u)] - k'(u) = 0.
    """
    grid = M.grid
    K = green_kernel_numeric(grid, params) if K is None else K
    w = grid.weights
    K_op = K.apply(np.eye(grid.N))  # (K o k) = K_op @ k
    A = -1j * (M.values.T * w[None, :]) @ K_op - _free_derivative(grid).toarray()
    m0, mT = boundary_rows(M)
    b = -1j * (qT * mT - q0 * m0)
    return A, b


def _solve_checked(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    lu, piv = sla.lu_factor(A, check_finite=False)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, np.linalg.norm(A, 1), norm="1")
    if info != 0 or rcond < COND_GUARD:
        raise ConditioningError(f"source equation is singular: reciprocal condition {rcond:.2e}")
    return sla.lu_solve((lu, piv), b, check_finite=False)


def solve_k(
    M: GridKernel, params: PUParams, q0: float = 0.0, qT: float = 0.0, K: GridKernel | None = None
) -> np.ndarray:
    if q0 == 0 and qT == 0:
        return np.zeros(M.grid.N, dtype=complex)
    A, b = source_system(M, params, q0, qT, K)
    return _solve_checked(A, b)


def endpoint_values(k: np.ndarray) -> tuple[complex, complex]:
    """Quadratic extrapolation of interior samples to t = 0 and t = T."""
    return 3 * k[0] - 3 * k[1] + k[2], 3 * k[-1] - 3 * k[-2] + k[-3]


# ---------------------------------------------------------------------------
# eigenvalue


@dataclass(frozen=True)
class TraceTerm:
    """Tr(K o M) over the retained modes by two routes."""

    weighted: complex
    spectral: complex | None
    n_max: int


def trace_term(M: GridKernel, K: GridKernel, n_max: int | None = None) -> TraceTerm:
    w = M.grid.weights
    if isinstance(M, SpectralKernel):
        n = M.rank if n_max is None else min(n_max, M.rank)
        Mn = M.truncate(n)
        KV = K.apply(Mn.modes)
        diag = np.einsum("in,in->n", Mn.modes, w[:, None] * KV)
        weighted = complex(np.sum(Mn.coeffs * diag))
        # c_n = sqrt(lambda_n) for the principal solution, so 1/sqrt(lambda_n) = 1/c_n
        spectral = complex(np.sum(1.0 / Mn.coeffs))
        return TraceTerm(weighted, spectral, n)
    KM = K.apply(M.values)
    return TraceTerm(complex(np.dot(w, np.diag(KM))), None, M.grid.N)


def resolve_hbar_tilde(params: PUParams, hbar_tilde: float | None) -> float:
    if hbar_tilde is not None:
        return hbar_tilde
    if params.alpha is None:
        raise ConfigurationError("alpha is not set; pass hbar_tilde or calibrate alpha first")
    return params.alpha * params.r * params.hbar


def action_eigenvalue(
    M: GridKernel,
    k: np.ndarray,
    params: PUParams,
    q0: float = 0.0,
    qT: float = 0.0,
    *,
    hbar_tilde: float | None = None,
    K: GridKernel | None = None,
    n_max: int | None = None,
    boundary_phase: bool = False,
) -> complex:
    """Lambda = -hbt/2 Tr(K o M) - <k, K o k>/2 + [q k]_0^T.

    The trace runs over the leading ``n_max`` modes of a spectral ``M``
    (default: the parameter cutoff). ``boundary_phase`` adds
    i (qT^2 - q0^2)/2, the local-limit boundary contribution.
    """
    hbt = resolve_hbar_tilde(params, hbar_tilde)
    K = green_kernel_numeric(M.grid, params) if K is None else K
    n_max = params.cutoff(M.grid.N) if n_max is None else n_max
    tr = trace_term(M, K, n_max)
    k = np.asarray(k)
    lam = -0.5 * hbt * tr.weighted
    if np.any(k):
        k0, kT = endpoint_values(k)
        lam += -0.5 * np.dot(M.grid.weights, k * K.apply(k)) + (qT * kT - q0 * k0)
    if boundary_phase:
        lam += 0.5j * (qT**2 - q0**2)
    return complex(lam)


# ---------------------------------------------------------------------------
# state


@dataclass(frozen=True)
class GroundState:
    M: GridKernel
    k: np.ndarray
    Lambda: complex
    hbar_tilde: float
    n_max: int
    residuals: dict = field(default_factory=dict)
    amplitude: complex = 1.0
    trace: TraceTerm | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.M.grid


def ground_state(
    grid: TimeGrid,
    params: PUParams,
    *,
    hbar_tilde: float | None = None,
    q0: float = 0.0,
    qT: float = 0.0,
    n_modes: int | None = None,
    n_max: int | None = None,
    residuals: bool = True,
) -> GroundState:
    """Assemble M, k and Lambda.

    ``n_modes`` is how many modes M keeps (all by default); ``n_max`` is the
    trace cutoff for Lambda (the parameter cutoff by default).
    """
    hbt = resolve_hbar_tilde(params, hbar_tilde)
    M = solve_M(grid, params, n_modes)
    K = green_kernel_numeric(grid, params)
    n_max = params.cutoff(grid.N) if n_max is None else min(n_max, grid.N)
    res: dict[str, float] = {}
    if q0 == 0 and qT == 0:
        k = np.zeros(grid.N, dtype=complex)
        res["source_norm"] = 0.0
    else:
        A, b = source_system(M, params, q0, qT, K)
        k = _solve_checked(A, b)
        res["source_norm"] = float(np.max(np.abs(A @ k - b)))
    if residuals:
        r29 = kernel_residual(M, params, K)
        res["kernel_norm"] = r29.l2_norm
        res["kernel_derivative"] = r29.derivative_l2
        res["kernel_quadratic"] = r29.quadratic_max
    tr = trace_term(M, K, n_max)
    lam = action_eigenvalue(M, k, params, q0, qT, hbar_tilde=hbt, K=K, n_max=n_max)
    return GroundState(M, k, lam, hbt, tr.n_max, res, 1.0, tr)


def log_wavefunctional(state: GroundState, q: Trajectory) -> complex:
    if q.grid != state.grid:
        raise ConfigurationError("trajectory and ground state live on different grids")
    if state.hbar_tilde == 0:
        raise ConfigurationError("hbar_tilde = 0: the wave functional is undefined")
    w = q.grid.weights
    quad = np.dot(w, q.q * state.M.apply(q.q))
    lin = np.dot(w, state.k * q.q)
    return complex(np.log(state.amplitude) - quad / (2 * state.hbar_tilde) + 1j * lin / state.hbar_tilde)


def evaluate_wavefunctional(state: GroundState, q: Trajectory) -> complex:
    return complex(np.exp(log_wavefunctional(state, q)))


@dataclass(frozen=True)
class NormalizabilityReport:
    min_eigenvalue: float
    normalizable: bool
    n_modes: int
    restricted: bool


def normalizability(M: GridKernel, hbar_tilde: float) -> NormalizabilityReport:
    """Finite-dimensional check that the Gaussian has finite norm.

    The spectrum of Re(W^1/2 M W^1/2) must be positive. For a kernel built
    on fewer than N modes the check runs on the retained subspace only.
    """
    N = M.grid.N
    if isinstance(M, SpectralKernel):
        ev = float(np.min(np.real(M.coeffs)))
        n, restricted = M.rank, M.rank < N
    else:
        s = np.sqrt(M.grid.weights)
        A = np.real(s[:, None] * M.values * s[None, :])
        ev = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
        n, restricted = N, False
    return NormalizabilityReport(ev, bool(ev > 0 and hbar_tilde > 0), n, restricted)


# ---------------------------------------------------------------------------
# action operator on the Gaussian ansatz


@dataclass(frozen=True)
class ActionCoefficients:
    """I Psi / Psi = <q, Q o q> + <l, q> + c, the terms sorted by powers of q."""

    quadratic: np.ndarray
    linear: np.ndarray
    constant: complex


def action_operator_coefficients(
    M: GridKernel,
    k: np.ndarray,
    params: PUParams,
    hbar_tilde: float,
    q0: float = 0.0,
    qT: float = 0.0,
    K: GridKernel | None = None,
) -> ActionCoefficients:
    """Apply the discretized action operator to the Gaussian and collect coefficients.

    Momentum acts as (hbt/i)(1/w_i) d/dq_i, the velocity is D1 q + b with
    the Dirichlet boundary vector b, and the potential is <q, q>/2.
    """
    grid = M.grid
    K = green_kernel_numeric(grid, params) if K is None else K
    w = grid.weights
    D1, b = diff_matrix(grid, 1, q0, qT)
    D = D1.values
    X = M.values
    k = np.asarray(k, dtype=complex)

    MKM = M.apply(K.apply(X))
    # i (D q)^T W X W q, symmetrized, as a kernel
    vel = (D.T @ (w[:, None] * X)) / w[:, None]
    vel = 0.5j * (vel + vel.T)
    quadratic = 0.5 * MKM - 0.5 * np.diag(1.0 / w) + vel

    Kk = K.apply(k)
    linear = -1j * M.apply(Kk) + 1j * M.apply(b) + (D.T @ (w * k)) / w

    tr = trace_term(M, K).weighted
    constant = -0.5 * hbar_tilde * tr - 0.5 * np.dot(w, k * Kk) + np.dot(w, b * k)
    return ActionCoefficients(quadratic, linear, complex(constant))
