"""Primal side of the double-well problem.

The energy is

    J(u) = gamma/2 <-Lap u, u> + alpha/2 int (u^2 - beta)^2 - <u, f>,

split as ``J(u) = F(u) - G(u, 0)`` with the convex quadratic

    F(u) = gamma/2 <-Lap u, u> + K/2 <u, u> - <u, f>

and ``G(u, v) = -alpha/2 int (u^2 - beta + v)^2 + K/2 int u^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ConvergenceError
from .grid import EllipticOperator, Grid, check_field, integrate, inner, l2_norm, laplacian
from .linalg import min_eigenvalue

__all__ = [
    "ModelParams",
    "PrimalState",
    "MembershipReport",
    "default_K",
    "default_K2",
    "eval_J",
    "eval_F",
    "eval_G",
    "primal_gradient",
    "primal_hessian",
    "check_A_plus",
    "primal_state",
]


def default_K(alpha: float, beta: float) -> float:
    return 8.0 * alpha * beta


def default_K2(K: float, alpha: float) -> float:
    """Largest admissible box radius, shrunk by 1% so the bound holds strictly."""
    return 0.99 * math.sqrt(K**3 / (32.0 * alpha))


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Scalar constants of the model plus the source field ``f``.

    ``K`` and ``K2`` default to ``8*alpha*beta`` and ``0.99*sqrt(K^3/(32 alpha))``.
    ``f=None`` means a zero source; it is materialized on first use per grid.
    """

    gamma: float
    alpha: float
    beta: float
    K: Optional[float] = None
    K2: Optional[float] = None
    f: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ConfigurationError(f"{name} must be strictly positive, got {val}")
            object.__setattr__(self, name, float(val))
        K = default_K(self.alpha, self.beta) if self.K is None else float(self.K)
        if not (np.isfinite(K) and K > 0):
            raise ConfigurationError(f"K must be strictly positive, got {K}")
        K2 = default_K2(K, self.alpha) if self.K2 is None else float(self.K2)
        if not (np.isfinite(K2) and K2 > 0):
            raise ConfigurationError(f"K2 must be strictly positive, got {K2}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "K2", K2)
        validate_box_bound(K, K2, self.alpha)
        if self.f is not None:
            f = np.array(self.f, dtype=float)
            if f.ndim != 1 or not np.all(np.isfinite(f)):
                raise ConfigurationError("source field f must be a finite 1-D array")
            f.setflags(write=False)
            object.__setattr__(self, "f", f)

    @property
    def box_margin(self) -> float:
        """``1/alpha - 32 K2^2 / K^3``; positive for consistent parameters."""
        return 1.0 / self.alpha - 32.0 * self.K2**2 / self.K**3

    def source(self, grid: Grid) -> np.ndarray:
        if self.f is None:
            return grid.zeros()
        return check_field(grid, self.f, "f")

    def with_source(self, f) -> "ModelParams":
        return replace(self, f=f)

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "alpha": self.alpha, "beta": self.beta,
                "K": self.K, "K2": self.K2}


def validate_box_bound(K: float, K2: float, alpha: float) -> None:
    if not 32.0 * K2**2 / K**3 - 1.0 / alpha < 0:
        raise ConfigurationError(
            f"C* bound violated: 32*K2^2/K^3 - 1/alpha = "
            f"{32.0 * K2**2 / K**3 - 1.0 / alpha:.6g} must be < 0 "
            f"(K={K}, K2={K2}, alpha={alpha})"
        )


def _stiffness(p: ModelParams, g: Grid) -> EllipticOperator:
    return laplacian(g, p.gamma, 0.0)


def eval_J(p: ModelParams, g: Grid, u) -> float:
    u = check_field(g, u, "u")
    f = p.source(g)
    grad_term = 0.5 * inner(g, _stiffness(p, g) @ u, u)
    well = 0.5 * p.alpha * integrate(g, (u**2 - p.beta) ** 2)
    return grad_term + well - inner(g, u, f)


def eval_F(p: ModelParams, g: Grid, u) -> float:
    u = check_field(g, u, "u")
    f = p.source(g)
    return (0.5 * inner(g, _stiffness(p, g) @ u, u)
            + 0.5 * p.K * inner(g, u, u) - inner(g, u, f))


def eval_G(p: ModelParams, g: Grid, u, v=None) -> float:
    u = check_field(g, u, "u")
    v = g.zeros() if v is None else check_field(g, v, "v")
    return (-0.5 * p.alpha * integrate(g, (u**2 - p.beta + v) ** 2)
            + 0.5 * p.K * inner(g, u, u))


def primal_gradient(p: ModelParams, g: Grid, u) -> np.ndarray:
    """L2 gradient ``-gamma Lap u + 2 alpha (u^2 - beta) u - f``."""
    u = check_field(g, u, "u")
    return _stiffness(p, g) @ u + 2.0 * p.alpha * (u**2 - p.beta) * u - p.source(g)


def primal_hessian(p: ModelParams, g: Grid, u) -> EllipticOperator:
    """Second variation ``-gamma Lap + 6 alpha u^2 - 2 alpha beta``."""
    u = check_field(g, u, "u")
    return laplacian(g, p.gamma, 6.0 * p.alpha * u**2 - 2.0 * p.alpha * p.beta)


@dataclass(frozen=True)
class MembershipReport:
    lambda_min: float
    tol: float
    in_A_plus: bool
    in_A_plus_strict: bool
    strict: bool = True
    converged: bool = True
    message: str = ""

    @property
    def member(self) -> bool:
        return self.in_A_plus_strict if self.strict else self.in_A_plus


def default_eig_tol(A: EllipticOperator) -> float:
    _, hi = A.gershgorin_bounds()
    return 1e-9 * (1.0 + abs(hi))


def check_A_plus(p: ModelParams, g: Grid, u, strict: bool = True,
                 tol: float | None = None) -> MembershipReport:
    """Classify ``u`` by the sign of the primal Hessian's smallest eigenvalue.

    Member of the closed cone iff ``lambda_min >= -tol``; of the open one iff
    ``lambda_min > tol``. Both flags are always filled in; ``strict`` picks
    which one ``report.member`` returns.
    """
    H = primal_hessian(p, g, u)
    if tol is None:
        tol = default_eig_tol(H)
    if tol < 0:
        raise ValueError("tol must be non-negative")
    try:
        lam = min_eigenvalue(H)
    except ConvergenceError as exc:
        return MembershipReport(float("nan"), tol, False, False, strict=strict,
                                converged=False, message=str(exc))
    return MembershipReport(lam, tol, lam >= -tol, lam > tol, strict=strict)


@dataclass
class PrimalState:
    u: np.ndarray = field(repr=False)
    J: float
    gradient_norm: float
    min_hessian_eigenvalue: Optional[float] = None


def primal_state(p: ModelParams, g: Grid, u, with_eigenvalue: bool = False) -> PrimalState:
    u = check_field(g, u, "u")
    lam = min_eigenvalue(primal_hessian(p, g, u)) if with_eigenvalue else None
    return PrimalState(u=u.copy(), J=eval_J(p, g, u),
                       gradient_norm=l2_norm(g, primal_gradient(p, g, u)),
                       min_hessian_eigenvalue=lam)
