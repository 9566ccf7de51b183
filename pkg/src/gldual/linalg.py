"""Linear-algebra engines: SPD solves and extremal eigenvalues.

These sit below the model and dual layers; :mod:`gldual.solvers` re-exports
them alongside the nonlinear solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, ConfigurationError
from .grid import EllipticOperator

__all__ = [
    "SolveOptions",
    "SolveReport",
    "solve_spd",
    "min_eigenvalue",
    "dense_min_eigenvalue",
]

DENSE_LIMIT = 200

Operator = Union[EllipticOperator, sp.spmatrix, np.ndarray]


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 100
    tol: float = 1e-10
    backtrack: float = 0.5
    armijo: float = 1e-4
    project: bool = True
    spd_method: str = "direct"
    spd_tol: float = 1e-10

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if not 0 < self.backtrack < 1:
            raise ConfigurationError(
                f"backtrack factor must lie in (0, 1), got {self.backtrack}"
            )
        if not 0 < self.armijo < 1:
            raise ConfigurationError(
                f"sufficient-decrease constant must lie in (0, 1), got {self.armijo}"
            )
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ConfigurationError(f"max_iter must be a non-negative integer, got {self.max_iter}")
        if self.spd_method not in ("direct", "cg"):
            raise ConfigurationError(f"unknown spd_method {self.spd_method!r}")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    objective: float
    history: list[float] = field(default_factory=list)
    message: str = ""


def _as_matrix(A: Operator):
    if isinstance(A, EllipticOperator):
        return A.matrix
    return A


def solve_spd(A: Operator, rhs, opts: SolveOptions | None = None) -> np.ndarray:
    """Solve ``A x = rhs`` for symmetric positive definite ``A``.

    Raises :class:`ConvergenceError` when ``||A x - rhs||_2 > spd_tol * ||rhs||_2``.
    """
    opts = opts or SolveOptions()
    M = _as_matrix(A)
    b = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if opts.spd_method == "cg":
        x, info = spla.cg(M, b, rtol=opts.spd_tol * 0.1, atol=0.0, maxiter=10 * b.size + 100)
        if info != 0:
            raise ConvergenceError(f"conjugate gradient stopped with info={info}")
    elif sp.issparse(M):
        x = spla.spsolve(M.tocsc(), b)
    else:
        x = sla.solve(M, b, assume_a="pos")
    res = np.linalg.norm(M @ x - b)
    if not np.all(np.isfinite(x)) or res > opts.spd_tol * bnorm:
        raise ConvergenceError(f"SPD solve residual {res:.3e} exceeds tolerance")
    return x


def dense_min_eigenvalue(A: Operator) -> float:
    M = _as_matrix(A)
    if sp.issparse(M):
        M = M.toarray()
    return float(sla.eigvalsh(np.asarray(M, dtype=float), subset_by_index=[0, 0])[0])


def min_eigenvalue(A: Operator, method: str = "auto", tol: float = 1e-12) -> float:
    """Smallest eigenvalue of a symmetric operator.

    ``method="auto"`` uses a dense eigensolver up to ``DENSE_LIMIT`` unknowns
    and shift-invert Lanczos (ARPACK) above it. The shift sits below the
    Gershgorin lower bound, so the eigenvalue nearest the shift is the
    smallest one.
    """
    M = _as_matrix(A)
    n = M.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "dense" or n < 3:
        return dense_min_eigenvalue(M)
    if method != "lanczos":
        raise ValueError(f"unknown eigenvalue method {method!r}")
    Ms = sp.csc_matrix(M)
    d = Ms.diagonal()
    radius = np.asarray(abs(Ms).sum(axis=1)).ravel() - np.abs(d)
    lo, hi = float(np.min(d - radius)), float(np.max(d + radius))
    sigma = lo - 1e-3 * max(hi - lo, 1.0)
    try:
        vals = spla.eigsh(Ms, k=1, sigma=sigma, which="LM", tol=tol,
                          maxiter=50 * n, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("Lanczos iteration did not converge") from exc
    return float(vals[0])
