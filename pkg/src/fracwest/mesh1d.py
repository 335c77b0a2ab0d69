"""Uniform P1 (hat function) discretization of the unit interval.

The left endpoint carries a homogeneous Dirichlet condition and is
eliminated from the unknowns; the right endpoint is a natural (zero flux)
Neumann boundary. Free unknowns are the nodal values at nodes ``1..n_cells``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularPivotError(ArithmeticError):
    """Raised when elimination meets a (numerically) zero pivot."""


@dataclass(frozen=True)
class Mesh1D:
    n_cells: int = 100
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_cells <= 0 or self.n_cells % 10:
            raise ValueError(f"n_cells must be a positive multiple of 10, got {self.n_cells}")
        object.__setattr__(self, "nodes", np.linspace(0.0, 1.0, self.n_cells + 1))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def n_free(self) -> int:
        return self.n_cells

    def node_index(self, x: float) -> int:
        """Index of the node at coordinate ``x``; raises if ``x`` is not a node."""
        i = int(round(x * self.n_cells))
        if not 0 <= i <= self.n_cells or abs(self.nodes[i] - x) > 1e-12:
            raise ValueError(f"location {x} is not a mesh node")
        return i

    def field(self, values) -> np.ndarray:
        """Validate nodal coefficient values (a CoeffField) and return them as an array."""
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n_nodes,):
            raise ValueError(f"coefficient field needs {self.n_nodes} nodal values, got shape {v.shape}")
        return v

    def sample(self, func) -> np.ndarray:
        return self.field(func(self.nodes))


@dataclass
class BandMatrix:
    """Tridiagonal matrix stored by diagonals.

    ``lower[i]`` is entry (i+1, i), ``upper[i]`` is entry (i, i+1).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        lo = self.lower.reshape((-1,) + (1,) * (v.ndim - 1))
        up = self.upper.reshape((-1,) + (1,) * (v.ndim - 1))
        out[1:] += lo * v[:-1]
        out[:-1] += up * v[1:]
        return out

    def toarray(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def scaled_add(self, a: float, other: "BandMatrix", b: float = 1.0) -> "BandMatrix":
        """Return ``b*self + a*other``."""
        return BandMatrix(b * self.lower + a * other.lower,
                          b * self.diag + a * other.diag,
                          b * self.upper + a * other.upper)

    def __mul__(self, s: float) -> "BandMatrix":
        return BandMatrix(s * self.lower, s * self.diag, s * self.upper)

    __rmul__ = __mul__

    def __add__(self, other: "BandMatrix") -> "BandMatrix":
        return self.scaled_add(1.0, other)


def assemble_stiffness(mesh: Mesh1D) -> BandMatrix:
    n, h = mesh.n_free, mesh.h
    diag = np.full(n, 2.0 / h)
    diag[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    return BandMatrix(off, diag, off.copy())


def assemble_weighted_mass(mesh: Mesh1D, w) -> BandMatrix:
    """Mass matrix with a piecewise linear weight, integrated exactly.

    On a cell with end weights ``wa, wb`` the local matrix is
    ``h/12 * [[3wa+wb, wa+wb], [wa+wb, wa+3wb]]``.
    """
    w = mesh.field(w)
    if not np.all(np.isfinite(w)):
        raise ValueError("weight contains non-finite entries")
    h = mesh.h
    wa, wb = w[:-1], w[1:]
    left = h * (3 * wa + wb) / 12.0   # node e against itself
    right = h * (wa + 3 * wb) / 12.0  # node e+1 against itself
    cross = h * (wa + wb) / 12.0
    # cell e spans nodes (e, e+1); free index of node k is k-1
    diag = right.copy()
    diag[:-1] += left[1:]
    return BandMatrix(cross[1:].copy(), diag, cross[1:].copy())


def solve_tridiagonal(m: BandMatrix, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm; ``rhs`` may carry extra trailing columns."""
    rhs = np.asarray(rhs, dtype=float)
    n = m.size
    if rhs.shape[0] != n:
        raise ValueError("rhs length does not match matrix size")
    tol = 1e-14 * max(np.max(np.abs(m.diag)), np.finfo(float).tiny)
    c = np.empty(n - 1)
    d = np.empty_like(rhs)
    piv = m.diag[0]
    if abs(piv) < tol:
        raise SingularPivotError("zero pivot in row 0")
    if n > 1:
        c[0] = m.upper[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = m.diag[i] - m.lower[i - 1] * c[i - 1]
        if abs(piv) < tol:
            raise SingularPivotError(f"zero pivot in row {i}")
        if i < n - 1:
            c[i] = m.upper[i] / piv
        d[i] = (rhs[i] - m.lower[i - 1] * d[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d


class TridiagonalFactor:
    """LU factors of a fixed tridiagonal matrix, reused over many solves."""

    def __init__(self, m: BandMatrix):
        n = m.size
        tol = 1e-14 * max(np.max(np.abs(m.diag)), np.finfo(float).tiny)
        self.lower = m.lower
        self.c = np.empty(max(n - 1, 0))
        self.piv = np.empty(n)
        self.piv[0] = m.diag[0]
        if abs(self.piv[0]) < tol:
            raise SingularPivotError("zero pivot in row 0")
        for i in range(1, n):
            self.c[i - 1] = m.upper[i - 1] / self.piv[i - 1]
            self.piv[i] = m.diag[i] - m.lower[i - 1] * self.c[i - 1]
            if abs(self.piv[i]) < tol:
                raise SingularPivotError(f"zero pivot in row {i}")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        n = self.piv.shape[0]
        d = np.array(rhs, dtype=float)
        d[0] /= self.piv[0]
        for i in range(1, n):
            d[i] = (d[i] - self.lower[i - 1] * d[i - 1]) / self.piv[i]
        for i in range(n - 2, -1, -1):
            d[i] -= self.c[i] * d[i + 1]
        return d
