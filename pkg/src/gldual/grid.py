"""Uniform finite-difference grids with homogeneous Dirichlet boundary.

Only interior nodes carry unknowns; boundary values are identically zero.
Fields are plain 1-D numpy arrays holding one value per interior node in
row-major order (the first axis varies slowest).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

__all__ = [
    "DomainSpec",
    "Grid",
    "EllipticOperator",
    "build_grid",
    "laplacian",
    "integrate",
    "inner",
    "l2_norm",
    "sup_norm",
    "check_field",
]


@dataclass(frozen=True)
class DomainSpec:
    """Interval or rectangle ``prod_d (0, extent[d])`` sampled by ``n`` nodes per axis."""

    dimension: int
    extent: tuple[float, ...]
    n: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError(f"dimension must be 1 or 2, got {self.dimension}")
        ext = self.extent
        if np.isscalar(ext):
            ext = (float(ext),) * self.dimension
        ext = tuple(float(e) for e in ext)
        if len(ext) == 1 and self.dimension == 2:
            ext = ext * 2
        if len(ext) != self.dimension:
            raise ConfigurationError(
                f"extent has {len(ext)} entries for a {self.dimension}D domain"
            )
        if any(not np.isfinite(e) or e <= 0 for e in ext):
            raise ConfigurationError(f"extent must be positive on every axis, got {ext}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigurationError(
                f"n must be an integer >= 3 so an interior node exists, got {self.n}"
            )
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (self.n - 1) for e in self.extent)

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))


@dataclass(frozen=True, eq=False)
class Grid:
    spec: DomainSpec
    coords: np.ndarray = field(repr=False)
    """Interior node coordinates, shape ``(size, dimension)``."""
    spacing: tuple[float, ...]
    weights: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        """Interior node counts per axis."""
        return (self.spec.n - 2,) * self.spec.dimension

    @property
    def h(self) -> float:
        """Spacing of the first axis (the only one for square grids)."""
        return self.spacing[0]

    @property
    def measure(self) -> float:
        return self.spec.measure

    def axis(self, d: int = 0) -> np.ndarray:
        """Coordinate of each interior node along axis ``d``."""
        return self.coords[:, d]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def constant(self, c: float) -> np.ndarray:
        return np.full(self.size, float(c))


def build_grid(spec: DomainSpec) -> Grid:
    hs = spec.spacing
    axes = [np.arange(1, spec.n - 1) * h for h in hs]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh])
    w = float(np.prod(hs))
    coords.setflags(write=False)
    weights = np.full(coords.shape[0], w)
    weights.setflags(write=False)
    return Grid(spec=spec, coords=coords, spacing=hs, weights=weights)


def check_field(grid: Grid, w, name: str = "field") -> np.ndarray:
    """Return ``w`` as a float array of the grid's interior size, or raise."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != grid.size:
        raise ValueError(
            f"{name} has shape {arr.shape}, expected ({grid.size},) for this grid"
        )
    return arr


def _neg_laplacian_1d(m: int, h: float) -> sp.csr_matrix:
    main = np.full(m, 2.0 / h**2)
    off = np.full(m - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _neg_laplacian(grid: Grid) -> sp.csr_matrix:
    m = grid.spec.n - 2
    if grid.dimension == 1:
        return _neg_laplacian_1d(m, grid.spacing[0])
    eye = sp.identity(m, format="csr")
    lx = _neg_laplacian_1d(m, grid.spacing[0])
    ly = _neg_laplacian_1d(m, grid.spacing[1])
    # row-major: x index is the slow one
    return (sp.kron(lx, eye) + sp.kron(eye, ly)).tocsr()


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """The symmetric operator ``-gamma * Lap_h + diag`` on interior nodes."""

    matrix: sp.csr_matrix = field(repr=False)
    gamma: float
    diag: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, w):
        return self.matrix @ np.asarray(w, dtype=float)

    def apply(self, w) -> np.ndarray:
        return self @ w

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def shifted(self, c: float) -> "EllipticOperator":
        """Same operator plus ``c * I``."""
        n = self.shape[0]
        return EllipticOperator(
            matrix=(self.matrix + c * sp.identity(n, format="csr")).tocsr(),
            gamma=self.gamma,
            diag=self.diag + c,
        )

    def gershgorin_bounds(self) -> tuple[float, float]:
        a = self.matrix
        d = a.diagonal()
        radius = np.asarray(abs(a).sum(axis=1)).ravel() - np.abs(d)
        return float(np.min(d - radius)), float(np.max(d + radius))


def laplacian(
    grid: Grid, gamma: float, diag: Union[float, Sequence[float], np.ndarray] = 0.0
) -> EllipticOperator:
    """Assemble ``-gamma * Lap_h + diag`` with the 3- or 5-point stencil.

    ``diag`` is a constant or a field; Dirichlet rows are eliminated so the
    operator acts on interior values only.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if np.ndim(diag) == 0:
        d = np.full(grid.size, float(diag))
    else:
        d = check_field(grid, diag, "diag").copy()
    mat = (gamma * _neg_laplacian(grid) + sp.diags(d, 0, format="csr")).tocsr()
    d.setflags(write=False)
    return EllipticOperator(matrix=mat, gamma=float(gamma), diag=d)


def integrate(grid: Grid, w) -> float:
    """Interior-node rectangle rule for the integral over the domain."""
    return float(np.dot(grid.weights, check_field(grid, w)))


def inner(grid: Grid, a, b) -> float:
    """Discrete L2 inner product."""
    return integrate(grid, check_field(grid, a, "a") * check_field(grid, b, "b"))


def l2_norm(grid: Grid, w) -> float:
    return float(np.sqrt(max(inner(grid, w, w), 0.0)))


def sup_norm(w) -> float:
    arr = np.asarray(w, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))
