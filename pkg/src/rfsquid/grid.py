"""Flux-grid discretization, Hermitian grid operators, eigensolver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constants import PHI0


class GridError(ValueError):
    """Invalid grid construction."""


class BoundaryLeakError(RuntimeError):
    """Ground-state amplitude at the grid boundary exceeds the leak bound."""


class EigenSolverError(RuntimeError):
    """Eigendecomposition failed."""


@dataclass(frozen=True)
class FluxGrid:
    """Uniform grid over the qubit flux, in flux-quantum units.

    center and halfwidth are fractions of Phi0; n must be odd so the
    center is a grid point.
    """

    center: float
    halfwidth: float
    n: int

    def __post_init__(self):
        if self.n < 64:
            raise GridError(f"n must be >= 64, got {self.n}")
        if self.n % 2 == 0:
            raise GridError(f"n must be odd, got {self.n}")
        if not self.halfwidth > 0:
            raise GridError(f"halfwidth must be positive, got {self.halfwidth}")

    @property
    def spacing(self) -> float:
        """Grid spacing in Wb."""
        return 2.0 * self.halfwidth * PHI0 / (self.n - 1)

    def points(self) -> np.ndarray:
        """Grid points in Wb."""
        return (self.center + np.linspace(-self.halfwidth, self.halfwidth, self.n)) * PHI0


@dataclass(frozen=True)
class FluxGridOperator:
    """Hermitian operator matrix over a FluxGrid."""

    grid: FluxGrid
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.grid.n, self.grid.n):
            raise GridError(f"matrix shape {m.shape} does not match grid n={self.grid.n}")
        nrm = np.linalg.norm(m)
        if nrm > 0 and np.linalg.norm(m - m.conj().T) > 1e-12 * nrm:
            raise GridError("matrix is not Hermitian within 1e-12 relative norm")
        m.setflags(write=False)


@dataclass(frozen=True)
class EigenSystem:
    """Lowest-k eigenpairs on a flux grid: ascending energies, orthonormal states."""

    grid: FluxGrid
    energies: np.ndarray = field(repr=False)   # J, ascending, shape (k,)
    states: np.ndarray = field(repr=False)     # shape (n, k), unit vectors
    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k", self.states.shape[1])
        self.energies.setflags(write=False)
        self.states.setflags(write=False)


def _is_tridiagonal(m: np.ndarray) -> bool:
    if np.iscomplexobj(m):
        return False
    mask = np.ones_like(m, dtype=bool)
    idx = np.arange(m.shape[0])
    mask[idx, idx] = False
    mask[idx[:-1], idx[:-1] + 1] = False
    mask[idx[:-1] + 1, idx[:-1]] = False
    return not np.any(m[mask])


def diagonalize(op: FluxGridOperator, k: int) -> EigenSystem:
    """Lowest k eigenpairs of a grid operator, ascending and orthonormal.

    Real tridiagonal matrices (finite-difference Hamiltonians) go through
    the specialized LAPACK path; anything else through a dense solve.
    Eigenvector phases are fixed by making the largest-magnitude component
    positive.
    """
    n = op.grid.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    m = op.matrix
    try:
        if _is_tridiagonal(m):
            w, v = scipy.linalg.eigh_tridiagonal(
                np.ascontiguousarray(np.diag(m)),
                np.ascontiguousarray(np.diag(m, 1)),
                select="i", select_range=(0, k - 1))
        else:
            w, v = scipy.linalg.eigh(m, subset_by_index=(0, k - 1))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"eigensolver failed: {exc}") from exc
    v = np.real_if_close(v)
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j].real < 0:
            v[:, j] = -v[:, j]
    return EigenSystem(grid=op.grid, energies=w, states=v)
