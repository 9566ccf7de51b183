"""Dual side: polar functionals, the reduced dual and primal recovery.

Dual variables are a pair ``(v1, v0)`` of fields. ``v0`` must stay in

    B* = {v0 : -2 v0 + K > K/2}   i.e.  v0 < K/4 pointwise,

and ``v1`` in the box ``C* = {||v1||_inf <= K2}``. On ``C* x B*`` the map
``v0 -> G*(v1, v0)`` is strictly concave, so the inner sup defining the
reduced dual ``J1*`` has a unique pointwise maximizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InfeasibleError
from .grid import Grid, check_field, inner, integrate, laplacian, sup_norm
from .linalg import SolveOptions, min_eigenvalue, solve_spd
from .model import ModelParams, default_eig_tol, validate_box_bound

__all__ = [
    "DualPair",
    "BranchReport",
    "check_B_star",
    "check_C_star",
    "eval_G_star",
    "grad_G_star_v1",
    "eval_F_star",
    "eval_J_star",
    "v0_of_v1",
    "stationarity_residual",
    "concavity_certificate",
    "eval_J1_star",
    "eval_J2_star",
    "grad_J1_star",
    "recover_u",
    "lambda_branch_check",
]


@dataclass(frozen=True, eq=False)
class DualPair:
    v1: np.ndarray = field(repr=False)
    v0: np.ndarray = field(repr=False)
    in_B_star: Optional[bool] = None
    in_C_star: Optional[bool] = None

    @classmethod
    def checked(cls, p: ModelParams, v1, v0, tol: float = 0.0) -> "DualPair":
        v1 = np.asarray(v1, dtype=float)
        v0 = np.asarray(v0, dtype=float)
        return cls(v1, v0, in_B_star=check_B_star(p, v0, tol)[0],
                   in_C_star=check_C_star(p, v1)[0])


@dataclass(frozen=True)
class BranchReport:
    min_eigenvalue: float
    lambda_is_zero: bool
    tol: float


def check_B_star(p: ModelParams, v0, tol: float = 0.0) -> tuple[bool, float]:
    """Return ``(member, margin)`` with ``margin = K/4 - max(v0)``."""
    margin = p.K / 4.0 - float(np.max(v0))
    return margin > tol, margin


def check_C_star(p: ModelParams, v1) -> tuple[bool, float]:
    """Return ``(member, margin)`` with ``margin = K2 - ||v1||_inf``."""
    validate_box_bound(p.K, p.K2, p.alpha)
    margin = p.K2 - sup_norm(v1)
    return margin >= 0.0, margin


def _require_B_star(p: ModelParams, v0) -> None:
    ok, margin = check_B_star(p, v0)
    if not ok:
        raise DomainError(
            f"v0 leaves B* (max v0 exceeds K/4 by {-margin:.3e}); "
            "the closed-form polar functional is undefined there"
        )


def eval_G_star(p: ModelParams, g: Grid, v1, v0) -> float:
    v1 = check_field(g, v1, "v1")
    v0 = check_field(g, v0, "v0")
    _require_B_star(p, v0)
    return (-0.5 * integrate(g, v1**2 / (2.0 * v0 - p.K))
            - integrate(g, v0**2) / (2.0 * p.alpha)
            - p.beta * integrate(g, v0))


def grad_G_star_v1(p: ModelParams, g: Grid, v1, v0) -> np.ndarray:
    """L2 partial gradient ``-v1 / (2 v0 - K)`` of G* in ``v1``."""
    return recover_u(p, g, DualPair(v1, v0))


def _shifted_stiffness(p: ModelParams, g: Grid):
    return laplacian(g, p.gamma, p.K)


def _solve_shifted(p: ModelParams, g: Grid, rhs, opts: SolveOptions | None = None):
    return solve_spd(_shifted_stiffness(p, g), rhs, opts)


def eval_F_star(p: ModelParams, g: Grid, v1, opts: SolveOptions | None = None) -> float:
    """Conjugate of F on the branch where the multiplier vanishes.

    ``1/2 <v1 + f, (-gamma Lap + K)^{-1} (v1 + f)>``, one SPD solve.
    """
    v1 = check_field(g, v1, "v1")
    r = v1 + p.source(g)
    return 0.5 * inner(g, r, _solve_shifted(p, g, r, opts))


def eval_J_star(p: ModelParams, g: Grid, pair: DualPair,
                opts: SolveOptions | None = None) -> float:
    return -eval_F_star(p, g, pair.v1, opts) + eval_G_star(p, g, pair.v1, pair.v0)


def stationarity_residual(p: ModelParams, v1, v0) -> np.ndarray:
    """Pointwise ``v1^2 / (2 v0 - K)^2 - v0 / alpha - beta``."""
    v1 = np.asarray(v1, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    return v1**2 / (2.0 * v0 - p.K) ** 2 - v0 / p.alpha - p.beta


def concavity_certificate(p: ModelParams, v1, v0) -> np.ndarray:
    """Pointwise ``4 v1^2 / |2 v0 - K|^3``; concavity in ``v0`` needs it below ``1/alpha``."""
    v1 = np.asarray(v1, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    return 4.0 * v1**2 / np.abs(2.0 * v0 - p.K) ** 3


def v0_of_v1(p: ModelParams, g: Grid, v1, max_iter: int = 200) -> np.ndarray:
    """Maximize ``G*(v1, .)`` over B* node by node.

    Solves ``s/(2t - K)^2 - t/alpha - beta = 0`` for ``t < K/4`` with
    ``s = v1^2`` by safeguarded Newton inside a sign-change bracket.
    """
    v1 = check_field(g, v1, "v1")
    a, b, K = p.alpha, p.beta, p.K
    s = v1**2

    def resid(t):
        return s / (2.0 * t - K) ** 2 - t / a - b

    hi = np.full_like(s, K / 4.0 - 1e-12 * K)
    r_hi = resid(hi)
    if np.any(r_hi >= 0):
        bad = int(np.argmax(r_hi))
        raise InfeasibleError(
            f"no root below K/4 at node {bad} (|v1|={abs(v1[bad]):.6g}); "
            "v1 is outside the admissible box"
        )
    lo = -a * (b + 4.0 * s / K**2) - 1.0
    step = np.maximum(np.abs(lo), 1.0)
    for _ in range(200):
        r_lo = resid(lo)
        need = r_lo <= 0
        if not np.any(need):
            break
        lo = np.where(need, lo - step, lo)
        step = np.where(need, 2.0 * step, step)
    else:
        raise InfeasibleError("could not bracket the inner stationarity root")

    t = np.clip(-a * b, lo, hi)
    for _ in range(max_iter):
        r = resid(t)
        lo = np.where(r > 0, t, lo)
        hi = np.where(r < 0, t, hi)
        dr = -4.0 * s / (2.0 * t - K) ** 3 - 1.0 / a
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t - r / dr
        bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        done = np.abs(t_new - t) <= 4e-16 * np.maximum(1.0, np.abs(t))
        t = t_new
        if np.all(done):
            break
    return t


def eval_J1_star(p: ModelParams, g: Grid, v1, opts: SolveOptions | None = None) -> float:
    v0 = v0_of_v1(p, g, v1)
    return eval_J_star(p, g, DualPair(v1, v0), opts)


def eval_J2_star(p: ModelParams, g: Grid, v1) -> float:
    """``sup_{v0 in B*} G*(v1, v0)``."""
    return eval_G_star(p, g, v1, v0_of_v1(p, g, v1))


def grad_J1_star(p: ModelParams, g: Grid, v1, opts: SolveOptions | None = None) -> np.ndarray:
    """L2 gradient of J1*; the inner-maximizer term drops out by stationarity."""
    v1 = check_field(g, v1, "v1")
    v0 = v0_of_v1(p, g, v1)
    w = _solve_shifted(p, g, v1 + p.source(g), opts)
    return -w - v1 / (2.0 * v0 - p.K)


def recover_u(p: ModelParams, g: Grid, pair: DualPair) -> np.ndarray:
    v1 = check_field(g, pair.v1, "v1")
    v0 = check_field(g, pair.v0, "v0")
    _require_B_star(p, v0)
    return v1 / (p.K - 2.0 * v0)


def lambda_branch_check(p: ModelParams, g: Grid, u_hat,
                        tol: float | None = None) -> BranchReport:
    """Certify the zero-multiplier branch of F*.

    The closed form of F* used here is valid when
    ``-gamma Lap + 6 alpha u_hat^2 - 2 alpha beta`` is positive definite.
    A failed check is reported, never repaired.
    """
    u_hat = check_field(g, u_hat, "u_hat")
    A = laplacian(g, p.gamma, 6.0 * p.alpha * u_hat**2 - 2.0 * p.alpha * p.beta)
    if tol is None:
        tol = default_eig_tol(A)
    lam = min_eigenvalue(A)
    return BranchReport(min_eigenvalue=lam, lambda_is_zero=lam > tol, tol=tol)
