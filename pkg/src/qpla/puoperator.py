"""The nonlocal operator L = 1 + r^2 d^2/dt^2 on [0, T] with Dirichlet data.

Kernels follow one contraction convention throughout::

    (K o f)_i = sum_j K_ij w_j f_j

so the identity operator is the discrete delta ``delta_ij / w_j`` and the
composition of two kernels is ``(A o B)_ij = sum_k A_ik w_k B_kj``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, solve_banded

from .errors import (
    ConditioningError,
    ConfigurationError,
    NumericalError,
    PoleError,
    SingularKernelError,
)
from .timegrid import GridMatrix, TimeGrid, diff_matrix

RESONANCE_GUARD = 1e-8
POLE_GUARD = 1e-10


@dataclass(frozen=True)
class PUParams:
    """Model parameters. ``r = 0`` selects the harmonic limit."""

    r: float
    T: float
    hbar: float = 1.0
    alpha: float | None = None
    n_max: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ConfigurationError(f"r must be >= 0, got {self.r}")
        if not np.isfinite(self.T) or self.T <= 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if not self.hbar > 0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if self.n_max is not None and self.n_max < 1:
            raise ConfigurationError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def omega(self) -> float:
        return math.inf if self.r == 0 else 1.0 / self.r

    @property
    def critical_index(self) -> int | None:
        """Largest n with 1 - (n pi r/T)^2 > 0; ``None`` when r = 0 (all modes positive)."""
        if self.r == 0:
            return None
        x = math.pi * self.r / self.T
        n = math.floor(1.0 / x)
        if 1.0 - (n * x) ** 2 <= 0:
            n -= 1
        return n

    def cutoff(self, N: int | None = None) -> int:
        """Mode cutoff used for traces: ``n_max`` if set, else the critical index."""
        if self.n_max is not None:
            n = self.n_max
        elif self.r == 0:
            if N is None:
                raise ConfigurationError("r = 0 needs an explicit n_max or a grid size")
            n = N
        else:
            n = max(self.critical_index, 1)
        return n if N is None else min(n, N)

    def check_resonance(self) -> None:
        if self.r == 0:
            return
        s = math.sin(self.omega * self.T)
        if abs(s) <= RESONANCE_GUARD:
            raise SingularKernelError(round(self.omega * self.T / math.pi), s)

    def check_poles(self, n_max: int) -> None:
        lam = continuum_eigenvalues(self, n_max)
        i = int(np.argmin(np.abs(lam)))
        if abs(lam[i]) <= POLE_GUARD:
            raise PoleError(
                f"eigenvalue lambda_{i + 1} = {lam[i]:.3e} is within {POLE_GUARD:g} of zero "
                f"(omega*T ~ {i + 1}*pi); L is not invertible"
            )


def continuum_eigenvalues(params: PUParams, n_max: int) -> np.ndarray:
    """lambda_n = 1 - n^2 pi^2 (r/T)^2 for n = 1..n_max."""
    n = np.arange(1, n_max + 1)
    return 1.0 - (n * math.pi * params.r / params.T) ** 2


def _real_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A @ B for real A without promoting A to complex."""
    if np.iscomplexobj(B):
        re = A @ np.ascontiguousarray(B.real)
        return re + 1j * (A @ np.ascontiguousarray(B.imag))
    return A @ B


def principal_sqrt(z) -> np.ndarray:
    """Square root with the branch sqrt(-x) = +i sqrt(x)."""
    return np.sqrt(np.asarray(z, dtype=complex))


# ---------------------------------------------------------------------------
# kernels


class GridKernel:
    """Two-point function sampled on the interior grid.

    Subclasses may hold a cheaper representation than the dense matrix and
    override :meth:`apply`; ``values`` is materialized on demand.
    """

    symmetric = True

    def __init__(self, grid: TimeGrid, values=None, symmetric: bool = True):
        self.grid = grid
        self.symmetric = symmetric
        if values is not None:
            values = np.asarray(values)
            if values.shape != (grid.N, grid.N):
                raise ConfigurationError(f"kernel shape {values.shape} does not match N={grid.N}")
            self.__dict__["values"] = values

    @cached_property
    def values(self) -> np.ndarray:
        raise NotImplementedError

    def apply(self, f) -> np.ndarray:
        f = self.grid._check(f)
        w = self.grid.weights
        return self.values @ (w[:, None] * f if f.ndim == 2 else w * f)

    def compose(self, other: "GridKernel") -> "GridKernel":
        w = self.grid.weights
        return GridKernel(self.grid, self.values @ (w[:, None] * other.values), symmetric=False)

    def weighted_trace(self) -> complex:
        """sum_i w_i K_ii, the trace of the operator the kernel represents."""
        return np.dot(self.grid.weights, np.diag(self.values))

    def asymmetry(self) -> float:
        K = self.values
        scale = np.max(np.abs(K))
        return float(np.max(np.abs(K - K.T)) / scale) if scale else 0.0

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(self.values.imag)


def delta_kernel(grid: TimeGrid) -> GridKernel:
    """The identity operator, delta(t - s) -> delta_ij / w_j."""
    return GridKernel(grid, np.diag(1.0 / grid.weights))


class AnalyticGreenKernel(GridKernel):
    """K(t,s) = omega/sin(omega T) sin(omega t<) sin(omega (t> - T))."""

    def __init__(self, grid: TimeGrid, params: PUParams):
        super().__init__(grid)
        self.params = params
        self.omega = params.omega
        self.amplitude = self.omega / math.sin(self.omega * grid.T)

    @cached_property
    def values(self) -> np.ndarray:
        t = self.grid.nodes
        lo = np.minimum.outer(t, t)
        hi = np.maximum.outer(t, t)
        w, T = self.omega, self.grid.T
        return self.amplitude * np.sin(w * lo) * np.sin(w * (hi - T))

    def apply(self, f) -> np.ndarray:
        # Separable kernel: two running sums give the exact dense contraction in O(N).
        f = self.grid._check(f)
        t, dt, w, T = self.grid.nodes, self.grid.dt, self.omega, self.grid.T
        a = np.sin(w * t)
        b = np.sin(w * (t - T))
        if f.ndim == 2:
            a, b = a[:, None], b[:, None]
        lower = np.cumsum(a * f, axis=0) * dt
        upper = np.cumsum((b * f)[::-1], axis=0)[::-1] * dt
        upper = np.concatenate([upper[1:], np.zeros_like(upper[:1])], axis=0)
        return self.amplitude * (b * lower + a * upper)


class NumericGreenKernel(GridKernel):
    """Discrete inverse of build_L, scaled so that K o (L f) = f."""

    def __init__(self, grid: TimeGrid, L: GridMatrix):
        super().__init__(grid)
        diag, off = L.diagonals()
        ab = np.zeros((3, grid.N))
        ab[0, 1:] = off
        ab[1] = diag
        ab[2, :-1] = off
        self._banded = ab

    def solve(self, f) -> np.ndarray:
        """L^{-1} f as a matrix solve (no weights)."""
        return solve_banded((1, 1), self._banded, np.asarray(f), check_finite=False)

    def apply(self, f) -> np.ndarray:
        f = self.grid._check(f)
        # K_ij w_j = (L^{-1})_ij, so the weights cancel
        return self.solve(f)

    @cached_property
    def values(self) -> np.ndarray:
        return self.solve(np.eye(self.grid.N)) / self.grid.weights[None, :]


class SpectralKernel(GridKernel):
    """K = sum_n c_n v_n(t_i) v_n(t_j) over weight-orthonormal modes v_n."""

    def __init__(self, grid: TimeGrid, modes: np.ndarray, coeffs: np.ndarray):
        super().__init__(grid)
        self.modes = modes
        self.coeffs = np.asarray(coeffs)

    @property
    def rank(self) -> int:
        return self.coeffs.shape[0]

    @cached_property
    def values(self) -> np.ndarray:
        return _real_matmul(self.modes, (self.coeffs[:, None] * self.modes.T))

    def apply(self, f) -> np.ndarray:
        f = self.grid._check(f)
        w = self.grid.weights
        proj = _real_matmul(self.modes.T, w[:, None] * f if f.ndim == 2 else w * f)
        c = self.coeffs[:, None] if f.ndim == 2 else self.coeffs
        return _real_matmul(self.modes, c * proj)

    def weighted_trace(self) -> complex:
        return complex(np.sum(self.coeffs))

    def truncate(self, n: int) -> "SpectralKernel":
        return SpectralKernel(self.grid, self.modes[:, :n], self.coeffs[:n])


# ---------------------------------------------------------------------------
# operations


def build_L(grid: TimeGrid, params: PUParams) -> GridMatrix:
    """L = I + r^2 D2 with zero velocity data at both ends."""
    D2, _ = diff_matrix(grid, 2)
    return GridMatrix(grid, (sp.identity(grid.N, format="csr") + params.r**2 * D2.values).tocsr())


def green_kernel_analytic(grid: TimeGrid, params: PUParams) -> GridKernel:
    if params.r == 0:
        return delta_kernel(grid)
    params.check_resonance()
    return AnalyticGreenKernel(grid, params)


def discrete_eigenvalues(grid: TimeGrid, params: PUParams) -> np.ndarray:
    """Closed-form eigenvalues of build_L, in mode order n = 1..N."""
    n = np.arange(1, grid.N + 1)
    return 1.0 - (2 * params.r / grid.dt) ** 2 * np.sin(n * math.pi / (2 * (grid.N + 1))) ** 2


def green_kernel_numeric(grid: TimeGrid, params: PUParams) -> NumericGreenKernel:
    lam = discrete_eigenvalues(grid, params)
    smallest = float(np.min(np.abs(lam)))
    if smallest <= POLE_GUARD:
        raise ConditioningError(
            f"L is near-singular on this grid: min |lambda_n| = {smallest:.3e}"
        )
    return NumericGreenKernel(grid, build_L(grid, params))


@dataclass(frozen=True)
class Spectrum:
    grid: TimeGrid
    eigenvalues: np.ndarray
    modes: np.ndarray

    @property
    def n_max(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n_c(self) -> int:
        """Number of leading retained modes with positive eigenvalue."""
        return int(np.count_nonzero(self.eigenvalues > 0))

    def truncate(self, n: int) -> "Spectrum":
        return Spectrum(self.grid, self.eigenvalues[:n], self.modes[:, :n])


def spectrum(grid: TimeGrid, params: PUParams, n_max: int | None = None) -> Spectrum:
    """Leading eigenpairs of build_L, lambda_n descending, modes with sum w v^2 = 1."""
    n_max = grid.N if n_max is None else n_max
    if not 1 <= n_max <= grid.N:
        raise ConfigurationError(f"n_max must lie in [1, N={grid.N}], got {n_max}")
    N = grid.N
    # r = 0 makes L the identity; the second-difference matrix shares its
    # eigenvectors and fixes a sine basis without degeneracy.
    L = build_L(grid, params) if params.r > 0 else diff_matrix(grid, 2)[0]
    d, e = L.diagonals()
    try:
        lam, U = eigh_tridiagonal(
            d, e, select="i", select_range=(N - n_max, N - 1), lapack_driver="stemr"
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
    lam, U = lam[::-1], U[:, ::-1]
    if params.r == 0:
        lam = np.ones_like(lam)
    U = U * np.where(U[0] < 0, -1.0, 1.0)
    return Spectrum(grid, lam, U / np.sqrt(grid.dt))


def operator_function(spec: Spectrum, f: Callable[[np.ndarray], np.ndarray]) -> SpectralKernel:
    """Kernel of f(L) restricted to the retained modes."""
    with np.errstate(divide="ignore", invalid="ignore"):
        coeffs = np.asarray(f(spec.eigenvalues))
    bad = ~np.isfinite(coeffs)
    if np.any(bad):
        n = int(np.argmax(bad)) + 1
        raise PoleError(f"operator function undefined at lambda_{n} = {spec.eigenvalues[n - 1]:.3e}")
    return SpectralKernel(spec.grid, spec.modes, coeffs)


@dataclass(frozen=True)
class TraceSeries:
    value: complex
    n_max: int
    n_c: int

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


def trace_inv_sqrt(params: PUParams, n_max: int | None = None) -> TraceSeries:
    """S = sum_{n<=n_max} (1 - n^2 pi^2 (r/T)^2)^(-1/2), principal branch."""
    n_max = params.cutoff() if n_max is None else n_max
    if n_max < 1:
        raise ConfigurationError(f"n_max must be >= 1, got {n_max}")
    params.check_poles(n_max)
    lam = continuum_eigenvalues(params, n_max)
    S = complex(np.sum(1.0 / principal_sqrt(lam)))
    n_c = params.critical_index
    return TraceSeries(S, n_max, n_max if n_c is None else n_c)


@dataclass(frozen=True)
class IntegralApprox:
    pi2: float
    derived: float
    n_c: int


def trace_integral_approx(params: PUParams) -> IntegralApprox:
    """The integral replacement of the trace series, two ways.

    ``pi2`` is the estimate pi^2 T / r. ``derived`` replaces the sum over
    n <= n_c by (T/(pi r)) * integral_0^{x_c} dx / sqrt(1 - x^2) with
    x_c = n_c pi r / T, which tends to T/(2r) as r -> 0.
    """
    if not params.r > 0:
        raise ConfigurationError("trace_integral_approx needs r > 0")
    r, T = params.r, params.T
    n_c = params.critical_index
    derived = T / (math.pi * r) * math.asin(min(1.0, n_c * math.pi * r / T))
    return IntegralApprox(math.pi**2 * T / r, derived, n_c)
