"""Steering dictionaries over direction-cosine grids.

Two forms are used by the solvers.  The block solver works on the reduced
dictionary Phi_u kron I_ny, never enumerating a v grid.  The flat baseline
works on the full 2-D dictionary Phi_u kron Phi_v with infeasible columns
(u^2 + v^2 > 1) removed.  The algebraic link between the two is

    (Phi_u kron I_ny) (I_mu kron Phi_v) = Phi_u kron Phi_v

which ``kron_factorization_check`` evaluates numerically.
"""

from dataclasses import dataclass

import numpy as np

from .signal_model import UraConfig

__all__ = [
    "Grid1D",
    "DictionaryPair",
    "KronDictionary",
    "uniform_grid",
    "steering",
    "steering_matrix",
    "dictionary_pair",
    "effective_dictionary",
    "kron_dictionary",
    "kron_factorization_check",
]


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing grid of direction cosines inside [-1, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("grid must be a non-empty 1-D array")
        if np.any(pts < -1.0) or np.any(pts > 1.0):
            raise ValueError("grid points must lie in [-1, 1]")
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")

    @property
    def size(self) -> int:
        return self.points.size


def uniform_grid(m: int, lo: float = -1.0, hi: float = 1.0) -> Grid1D:
    """Endpoint-inclusive uniform grid of m >= 2 points on [lo, hi]."""
    if m < 2:
        raise ValueError(f"uniform grid needs at least 2 points, got {m}")
    if not (-1.0 <= lo < hi <= 1.0):
        raise ValueError(f"grid bounds must satisfy -1 <= lo < hi <= 1, got ({lo}, {hi})")
    return Grid1D(np.linspace(lo, hi, m))


def steering(freq: float, n: int) -> np.ndarray:
    """Length-n steering vector exp(j pi p freq), p = 0..n-1."""
    if n < 1:
        raise ValueError("steering vector length must be >= 1")
    return np.exp(1j * np.pi * np.arange(n) * freq)


def steering_matrix(grid: Grid1D, n: int) -> np.ndarray:
    """n x m matrix whose columns are steering vectors over the grid."""
    if n < 1:
        raise ValueError("steering vector length must be >= 1")
    return np.exp(1j * np.pi * np.outer(np.arange(n), grid.points))


@dataclass(frozen=True)
class DictionaryPair:
    """1-D steering dictionaries Phi_u (nx x mu) and Phi_v (ny x mv)."""

    phi_u: np.ndarray
    phi_v: np.ndarray
    grid_u: Grid1D
    grid_v: Grid1D

    def __post_init__(self):
        if self.phi_u.shape[1] != self.grid_u.size:
            raise ValueError("phi_u columns must match grid_u size")
        if self.phi_v.shape[1] != self.grid_v.size:
            raise ValueError("phi_v columns must match grid_v size")


def dictionary_pair(config: UraConfig, grid_u: Grid1D, grid_v: Grid1D) -> DictionaryPair:
    """Build the steering pair for an array geometry and two grids."""
    return DictionaryPair(
        phi_u=steering_matrix(grid_u, config.nx),
        phi_v=steering_matrix(grid_v, config.ny),
        grid_u=grid_u,
        grid_v=grid_v,
    )


def effective_dictionary(phi_u: np.ndarray, ny: int) -> np.ndarray:
    """Materialize Phi_u kron I_ny.  Intended for small problems and tests;
    the solver applies the same operator implicitly."""
    if ny < 1:
        raise ValueError("block size must be >= 1")
    return np.kron(phi_u, np.eye(ny))


@dataclass(frozen=True)
class KronDictionary:
    """Flat 2-D dictionary: columns of Phi_u kron Phi_v with (u, v) labels.

    ``column_labels`` has shape (P, 2); row p holds the (u, v) pair of
    column p.  Columns are ordered u-major (v varies fastest), matching the
    vec(S^T) stacking of the signal model.
    """

    matrix: np.ndarray
    column_labels: np.ndarray

    def __post_init__(self):
        if self.matrix.shape[1] != self.column_labels.shape[0]:
            raise ValueError("one label per dictionary column required")

    @property
    def size(self) -> int:
        return self.matrix.shape[1]


def kron_dictionary(pair: DictionaryPair, prune: bool = True) -> KronDictionary:
    """Full 2-D dictionary over the grid product.

    With ``prune`` (the default) columns whose label violates
    u^2 + v^2 <= 1 are dropped; the boundary itself is kept.
    """
    matrix = np.kron(pair.phi_u, pair.phi_v)
    uu, vv = np.meshgrid(pair.grid_u.points, pair.grid_v.points, indexing="ij")
    labels = np.column_stack([uu.ravel(), vv.ravel()])
    if prune:
        keep = labels[:, 0] ** 2 + labels[:, 1] ** 2 <= 1.0
        matrix = matrix[:, keep]
        labels = labels[keep]
    return KronDictionary(matrix=matrix, column_labels=labels)


def kron_factorization_check(phi_u: np.ndarray, phi_v: np.ndarray) -> float:
    """Max-abs deviation of (Phi_u kron I)(I kron Phi_v) from Phi_u kron Phi_v."""
    ny = phi_v.shape[0]
    mu = phi_u.shape[1]
    lhs = np.kron(phi_u, np.eye(ny)) @ np.kron(np.eye(mu), phi_v)
    rhs = np.kron(phi_u, phi_v)
    return float(np.max(np.abs(lhs - rhs)))
