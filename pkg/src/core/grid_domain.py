"""
Grid Domain
Uniform finite-difference discretization of the interval O = (0, L) with
homogeneous Dirichlet boundary, the discrete Laplacian, its first eigenvalue
and the quadrature norms used throughout the energy identities.
"""
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

ArrayLike = Union[np.ndarray, "Field"]


@dataclass(frozen=True)
class IntervalGrid:
    """Interior nodes x_i = i*h, i = 1..n, of (0, L) with h = L/(n+1)."""
    length: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            raise ValueError(f"Grid length must be positive, got {self.length}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"Grid needs at least 2 interior nodes, got {self.n}")

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    def sample(self, profile: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Evaluate a profile x -> u(x) at the interior nodes."""
        values = np.asarray(profile(self.nodes), dtype=float)
        return Field(np.broadcast_to(values, (self.n,)).copy(), self)

    def zeros(self) -> "Field":
        return Field(np.zeros(self.n), self)

    def refine(self, factor: int) -> "IntervalGrid":
        """Grid with spacing h/factor on the same interval."""
        return IntervalGrid(self.length, factor * (self.n + 1) - 1)


@dataclass(frozen=True)
class Field:
    """Nodal values of u at the interior nodes; boundary ghosts are zero."""
    values: np.ndarray
    grid: IntervalGrid

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"Field has {self.values.shape} values, grid expects ({self.grid.n},)"
            )

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(values, self.grid)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def _values(f: ArrayLike) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


# =============================================================================
# OPERATORS
# =============================================================================

def build_laplacian(grid: IntervalGrid) -> sp.csr_matrix:
    """(1/h^2) * tridiag(1, -2, 1) on the interior nodes."""
    n = grid.n
    inv_h2 = 1.0 / grid.h ** 2
    return sp.diags(
        [np.full(n - 1, inv_h2), np.full(n, -2.0 * inv_h2), np.full(n - 1, inv_h2)],
        offsets=[-1, 0, 1],
        format="csr",
    )


def apply_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Matrix-free stencil application with zero ghosts; matches build_laplacian."""
    padded = np.concatenate(([0.0], values, [0.0]))
    return (padded[:-2] - 2.0 * padded[1:-1] + padded[2:]) / h ** 2


def continuum_first_eigenvalue(length: float) -> float:
    return float(np.pi ** 2 / length ** 2)


def first_eigenvalue(grid: IntervalGrid, continuum: bool = False) -> float:
    """
    Smallest eigenvalue of the negative Dirichlet Laplacian.

    The discrete value for the three-point stencil is (2/h^2)(1 - cos(pi*h/L));
    with continuum=True the exact value pi^2/L^2 is returned instead.
    """
    if continuum:
        return continuum_first_eigenvalue(grid.length)
    h = grid.h
    return float(2.0 / h ** 2 * (1.0 - np.cos(np.pi * h / grid.length)))


def first_eigenvalue_numeric(grid: IntervalGrid) -> float:
    """Shift-invert Lanczos estimate, used to cross-check the closed form."""
    minus_lap = -build_laplacian(grid).tocsc()
    value = eigsh(minus_lap, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(value[0])


def first_eigenvector(grid: IntervalGrid) -> Field:
    return grid.sample(lambda x: np.sin(np.pi * x / grid.length))


# =============================================================================
# NORMS (rectangle rule with weight h)
# =============================================================================

def inner(f: ArrayLike, g: ArrayLike, h: float) -> float:
    return float(h * np.dot(_values(f), _values(g)))


def l2_squared(values: np.ndarray, h: float) -> float:
    return float(h * np.dot(values, values))


def h1_squared(values: np.ndarray, h: float) -> float:
    padded = np.concatenate(([0.0], values, [0.0]))
    gaps = np.diff(padded) / h
    return float(h * np.dot(gaps, gaps))


def lp_power(values: np.ndarray, p: float, h: float) -> float:
    """h * sum |f_i|^p, i.e. the p-th power of the L^p norm."""
    return float(h * np.sum(np.abs(values) ** p))


def norm_l2(f: Field) -> float:
    return float(np.sqrt(l2_squared(f.values, f.grid.h)))


def seminorm_h1(f: Field) -> float:
    """Discrete |grad f|_{L2} from forward differences over the n+1 gaps."""
    return float(np.sqrt(h1_squared(f.values, f.grid.h)))


def norm_lp(f: Field, p: float) -> float:
    if not np.isfinite(p) or p < 1:
        raise ValueError(f"norm_lp needs a finite p >= 1, got {p}")
    return float(lp_power(f.values, p, f.grid.h) ** (1.0 / p))
