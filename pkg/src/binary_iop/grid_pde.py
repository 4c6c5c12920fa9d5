"""
Crank-Nicolson forward solver for the binary-option price in log-moneyness.

The price ``U(y, tau)`` with ``y = log(K/x)`` and ``tau = T - t`` solves

    U_tau = (sigma0^2 / 2) U_yy + (sigma0^2 / 2 - mu(y)) U_y - r U,
    U(y, 0) = H(-y),

with drift ``mu(y) = r + theta1 y + theta2 y^2 + theta3 y^3``. The equation
is marched on a uniform grid with artificial Dirichlet boundaries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._tridiag import cn_march, factor_tridiag, substitute

# Value of H(-y) at a node sitting exactly on y = 0. The midpoint keeps the
# scheme second order when refinement puts a node on the discontinuity.
HEAVISIDE_AT_ZERO = 0.5

BOUNDARY_MODES = ("fixed", "discounted")


class ZeroPivotError(ArithmeticError):
    """Raised when the implicit tridiagonal system cannot be eliminated."""

    def __init__(self, message: str, time_index: int | None = None):
        super().__init__(message)
        self.time_index = time_index


@dataclass(frozen=True)
class ModelParams:
    """Unknown coefficients (theta1, theta2, theta3, sigma0) plus the rate r."""

    theta1: float
    theta2: float
    theta3: float
    sigma0: float
    r: float = 0.05

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3", "sigma0", "r"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.r < 0:
            raise ValueError(f"r must be non-negative, got {self.r}")

    @property
    def theta(self) -> np.ndarray:
        """The 4-vector (theta1, theta2, theta3, sigma0)."""
        return np.array([self.theta1, self.theta2, self.theta3, self.sigma0])

    @classmethod
    def from_vector(cls, theta: Sequence[float], r: float = 0.05) -> "ModelParams":
        t = np.asarray(theta, dtype=float).ravel()
        if t.shape != (4,):
            raise ValueError(f"expected 4 parameters, got shape {t.shape}")
        return cls(t[0], t[1], t[2], t[3], r)


@dataclass(frozen=True)
class GridSpec:
    """Uniform (y, tau) lattice; ``n_y`` counts both boundary nodes."""

    y_min: float = -1.5
    y_max: float = 1.5
    n_y: int = 100
    n_tau: int = 400
    tau_star: float = 0.4
    boundary: str = "fixed"

    def __post_init__(self):
        if not (self.y_min < 0 < self.y_max):
            raise ValueError(f"need y_min < 0 < y_max, got [{self.y_min}, {self.y_max}]")
        if int(self.n_y) != self.n_y or self.n_y < 3:
            raise ValueError(f"n_y must be an integer >= 3, got {self.n_y}")
        if int(self.n_tau) != self.n_tau or self.n_tau < 1:
            raise ValueError(f"n_tau must be an integer >= 1, got {self.n_tau}")
        if not (self.tau_star > 0 and math.isfinite(self.tau_star)):
            raise ValueError(f"tau_star must be positive, got {self.tau_star}")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        object.__setattr__(self, "n_y", int(self.n_y))
        object.__setattr__(self, "n_tau", int(self.n_tau))

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n_y - 1)

    @property
    def dtau(self) -> float:
        return self.tau_star / self.n_tau

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.n_y)

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_star, self.n_tau + 1)

    @property
    def interior(self) -> np.ndarray:
        return self.y[1:-1]

    def refined(self, space: int = 2, time: int = 4) -> "GridSpec":
        """Grid with ``dy / space`` and ``dtau / time`` over the same domain."""
        return GridSpec(
            self.y_min,
            self.y_max,
            (self.n_y - 1) * space + 1,
            self.n_tau * time,
            self.tau_star,
            self.boundary,
        )


@dataclass(frozen=True)
class CnCoefficients:
    """Per-node stencil weights; a_i + c_i = -b for every node."""

    a: np.ndarray
    b: float
    c: np.ndarray


@dataclass(frozen=True)
class TridiagonalSystem:
    """
    Operators of ``matrix_a u_next = matrix_b u_now + boundary_vector``.

    Each operator is stored as three length ``n_y - 2`` bands. ``lower[0]``
    and ``upper[-1]`` are not matrix entries; they hold the weights that
    couple the first and last interior rows to the Dirichlet nodes.
    """

    a_lower: np.ndarray
    a_diag: np.ndarray
    a_upper: np.ndarray
    b_lower: np.ndarray
    b_diag: np.ndarray
    b_upper: np.ndarray
    boundary_vector: np.ndarray

    @property
    def size(self) -> int:
        return self.a_diag.shape[0]

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense copies of ``matrix_a`` and ``matrix_b``."""
        return (
            _dense(self.a_lower, self.a_diag, self.a_upper),
            _dense(self.b_lower, self.b_diag, self.b_upper),
        )

    def boundary_terms(self, left_now, left_next, right_now, right_next) -> np.ndarray:
        vec = np.zeros(self.size)
        vec[0] += self.b_lower[0] * left_now - self.a_lower[0] * left_next
        vec[-1] += self.b_upper[-1] * right_now - self.a_upper[-1] * right_next
        return vec


def _dense(lower, diag, upper):
    return np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)


@dataclass(frozen=True)
class PdeSolution:
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    params: ModelParams

    @property
    def final(self) -> np.ndarray:
        """Prices at the observation horizon tau_star."""
        return self.values[:, -1]

    def observe(self, points) -> np.ndarray:
        return observe(self, points)


def drift_eval(params: ModelParams, y):
    """mu(y) = r + theta1 y + theta2 y^2 + theta3 y^3."""
    y = np.asarray(y, dtype=float)
    out = params.r + y * (params.theta1 + y * (params.theta2 + y * params.theta3))
    return float(out) if out.ndim == 0 else out


def assemble_cn(
    params: ModelParams,
    grid: GridSpec,
    drift: Callable | None = None,
    left: float = 1.0,
    right: float = 0.0,
    discount: str = "explicit",
) -> tuple[CnCoefficients, TridiagonalSystem]:
    """
    Build the Crank-Nicolson operators for one parameter set.

    Central differences in y and trapezoidal weighting in tau give

        a_i = -dtau / (4 dy^2) * (sigma0^2 + dy (sigma0^2/2 - mu(y_i)))
        c_i = -dtau / (4 dy^2) * (sigma0^2 - dy (sigma0^2/2 - mu(y_i)))
        b   =  dtau / (2 dy^2) * sigma0^2

    so that ``matrix_a`` has diagonal ``1 + b`` with ``c_i`` below and
    ``a_i`` above, and ``matrix_b`` has diagonal ``1 - b - r dtau`` with
    ``-c_i`` below and ``-a_i`` above.

    Parameters
    ----------
    params : ModelParams
    grid : GridSpec
    drift : callable, optional
        Replaces the cubic perturbation: ``mu(y) = r + drift(y)``.
    left, right : float
        Constant Dirichlet values folded into ``boundary_vector``.
    discount : {"explicit", "split"}
        Put the whole ``r dtau`` term on the explicit side, or half on
        each side.
    """
    y = grid.interior
    if drift is None:
        mu = drift_eval(params, y)
    else:
        mu = params.r + np.asarray(drift(y), dtype=float)
    s2 = params.sigma0**2
    dy, dtau = grid.dy, grid.dtau
    adv = 0.5 * s2 - mu
    k = dtau / (4.0 * dy * dy)
    a = -k * (s2 + dy * adv)
    c = -k * (s2 - dy * adv)
    b = dtau * s2 / (2.0 * dy * dy)

    if discount == "explicit":
        imp, exp_ = 0.0, params.r * dtau
    elif discount == "split":
        imp = exp_ = 0.5 * params.r * dtau
    else:
        raise ValueError(f"unknown discount placement {discount!r}")

    n = y.shape[0]
    system = TridiagonalSystem(
        a_lower=c.copy(),
        a_diag=np.full(n, 1.0 + b + imp),
        a_upper=a.copy(),
        b_lower=-c,
        b_diag=np.full(n, 1.0 - b - exp_),
        b_upper=-a,
        boundary_vector=np.zeros(n),
    )
    object.__setattr__(
        system, "boundary_vector", system.boundary_terms(left, left, right, right)
    )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c)) and math.isfinite(b)):
        raise ValueError("non-finite Crank-Nicolson coefficients")

    off = np.abs(system.a_lower) + np.abs(system.a_upper)
    off[0] -= abs(system.a_lower[0])
    off[-1] -= abs(system.a_upper[-1])
    if np.any(np.abs(system.a_diag) <= off):
        warnings.warn(
            "implicit Crank-Nicolson matrix is not strictly diagonally dominant",
            RuntimeWarning,
            stacklevel=2,
        )
    return CnCoefficients(a=a, b=b, c=c), system


def step(system: TridiagonalSystem, u_now) -> np.ndarray:
    """Advance interior values one time level by a Thomas solve."""
    u_now = np.asarray(u_now, dtype=float)
    if u_now.shape != (system.size,):
        raise ValueError(f"expected {system.size} interior values, got {u_now.shape}")
    rhs = system.b_diag * u_now + system.boundary_vector
    rhs[1:] += system.b_lower[1:] * u_now[:-1]
    rhs[:-1] += system.b_upper[:-1] * u_now[1:]
    pivots, mults, bad = factor_tridiag(system.a_lower, system.a_diag, system.a_upper)
    if bad >= 0:
        raise ZeroPivotError(f"zero pivot in row {bad}")
    out = np.empty_like(rhs)
    substitute(pivots, mults, system.a_upper, rhs, out)
    return out


def initial_condition(y) -> np.ndarray:
    """H(-y) on the nodes, with ``HEAVISIDE_AT_ZERO`` at y == 0."""
    y = np.asarray(y, dtype=float)
    return np.where(y < 0, 1.0, np.where(y > 0, 0.0, HEAVISIDE_AT_ZERO))


def boundary_values(grid: GridSpec, r: float, boundary=None) -> tuple[np.ndarray, np.ndarray]:
    """
    Dirichlet values at every time level.

    ``boundary`` may be a callable ``tau -> (left, right)`` taking the
    array of time levels; otherwise ``grid.boundary`` selects constant
    (1, 0) or discounted (exp(-r tau), 0) values.
    """
    tau = grid.tau
    if callable(boundary):
        left, right = boundary(tau)
        left = np.broadcast_to(np.asarray(left, dtype=float), tau.shape).copy()
        right = np.broadcast_to(np.asarray(right, dtype=float), tau.shape).copy()
        return left, right
    mode = grid.boundary if boundary is None else boundary
    if mode == "fixed":
        return np.ones_like(tau), np.zeros_like(tau)
    if mode == "discounted":
        return np.exp(-r * tau), np.zeros_like(tau)
    raise ValueError(f"unknown boundary mode {mode!r}")


def solve_forward(
    params: ModelParams,
    grid: GridSpec,
    drift: Callable | None = None,
    boundary=None,
    discount: str = "explicit",
) -> PdeSolution:
    """
    March the price surface from tau = 0 to tau_star.

    Raises
    ------
    ZeroPivotError
        If the implicit system cannot be eliminated; ``time_index`` names
        the first time level that could not be computed.
    """
    _, system = assemble_cn(params, grid, drift=drift, discount=discount)
    left, right = boundary_values(grid, params.r, boundary)
    u0 = initial_condition(grid.y)
    values, failed = cn_march(
        system.a_lower,
        system.a_diag,
        system.a_upper,
        system.b_lower,
        system.b_diag,
        system.b_upper,
        u0,
        left,
        right,
    )
    if failed >= 0:
        raise ZeroPivotError(f"zero pivot at time index {failed}", time_index=failed)
    return PdeSolution(grid=grid, values=values.T, params=params)


def observe(solution: PdeSolution, points) -> np.ndarray:
    """
    Prices at tau_star at the requested y locations.

    Points on grid nodes are read exactly; others are linearly interpolated.
    """
    grid = solution.grid
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    tol = 1e-12 * max(1.0, abs(grid.y_min), abs(grid.y_max))
    if np.any(~np.isfinite(pts)) or np.any(pts < grid.y_min - tol) or np.any(pts > grid.y_max + tol):
        raise ValueError(f"observation points must lie in [{grid.y_min}, {grid.y_max}]")
    pts = np.clip(pts, grid.y_min, grid.y_max)
    pos = (pts - grid.y_min) / grid.dy
    idx = np.rint(pos).astype(int)
    on_node = np.abs(pos - idx) <= 1e-9
    final = solution.final
    out = np.interp(pts, grid.y, final)
    out[on_node] = final[idx[on_node]]
    return out
