"""Modal (pole/residue) checks for the one-dimensional Dirichlet-Neumann operator.

Each eigenmode ``lambda`` of ``-d^2/dx^2`` on (0, 1) with ``u(0) = 0``,
``u'(1) = 0`` evolves with the transfer function ``1/omega(z)``,
``omega(z) = z^2 + b lambda^bt z + c^2 lambda``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigh

from .forward import Excitation, ModelParams
from .fracquad import TimeGrid, build_weights, integrate
from .mesh1d import Mesh1D, assemble_stiffness, assemble_weighted_mass, solve_tridiagonal

Signal = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass
class EigenPair:
    index: int
    lam: float
    phi: np.ndarray


@dataclass
class PolePair:
    p_plus: complex
    p_minus: complex
    residue_plus: complex

    @property
    def residue_minus(self) -> complex:
        return -self.residue_plus


def eigenpairs_dn(count: int, mesh: Optional[Mesh1D] = None) -> list:
    """Analytic eigenpairs ``((j - 1/2) pi)^2``, ``sqrt(2) sin((j - 1/2) pi x)``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    mesh = mesh or Mesh1D()
    out = []
    for j in range(1, count + 1):
        k = (j - 0.5) * np.pi
        out.append(EigenPair(j, k * k, np.sqrt(2.0) * np.sin(k * mesh.nodes)))
    return out


def discrete_eigenvalues(mesh: Mesh1D, count: int) -> np.ndarray:
    """Smallest generalized eigenvalues of the assembled (stiffness, mass) pair."""
    A = assemble_stiffness(mesh).toarray()
    M = assemble_weighted_mass(mesh, np.ones(mesh.n_nodes)).toarray()
    return eigh(A, M, eigvals_only=True, subset_by_index=[0, count - 1])


def omega(z, lam: float, b: float, c: float = 1.0, beta_tilde: float = 0.0):
    return z * z + b * lam ** beta_tilde * z + c * c * lam


def poles_and_residue(lam: float, b: float, c: float = 1.0, beta_tilde: float = 0.0) -> PolePair:
    if not lam > 0 or b < 0 or not c > 0:
        raise ValueError("need lambda > 0, b >= 0, c > 0")
    half = 0.5 * b * lam ** beta_tilde
    root = np.sqrt(complex(half * half - c * c * lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        res = 1.0 / (2.0 * root) if root != 0 else complex(np.inf, np.inf)
    p_minus = -half - root
    # overdamped: -half + root cancels, take it from p+ p- = c^2 lambda instead
    p_plus = c * c * lam / p_minus if root.real > 0 else -half + root
    return PolePair(complex(p_plus), complex(p_minus), res)


def check_pole_separation(lambdas: Sequence[float], b: float, c: float = 1.0,
                          beta_tilde: float = 0.0, gap: float = 1e-10,
                          min_residue: float = 1e-12) -> bool:
    """True iff all ``p+`` are pairwise distinct, all poles simple and all residues nonzero."""
    pairs = [poles_and_residue(lam, b, c, beta_tilde) for lam in lambdas]
    p = np.array([q.p_plus for q in pairs])
    for q in pairs:
        if abs(q.p_plus - q.p_minus) <= gap or not np.isfinite(q.residue_plus):
            return False
        if abs(q.residue_plus) <= min_residue:
            return False
    d = np.abs(p[:, None] - p[None, :])
    np.fill_diagonal(d, np.inf)
    return bool(np.all(d > gap))


def _sample(f: Signal, t: np.ndarray) -> np.ndarray:
    return np.asarray(f(t) if callable(f) else f, dtype=float)


def separable_excitation(phi, psi: Signal, psi_tt: Signal, params: ModelParams, mesh: Mesh1D,
                         grid: TimeGrid, caputo_psi: Optional[Signal] = None,
                         boundary_tol: float = 0.05) -> Excitation:
    """Excitation whose linear (kappa = 0) response is ``phi(x) psi(t)``.

    ``r = s phi psi'' + (A phi) psi + b (A phi) d_t^alpha psi`` with ``A phi``
    the discrete stiffness action ``M^{-1} K phi``. The Caputo derivative of
    ``psi`` is taken from ``caputo_psi`` when given, otherwise from the
    product-trapezoidal quadrature.
    """
    phi = mesh.sample(phi) if callable(phi) else mesh.field(phi)
    scale = max(np.max(np.abs(phi)), 1e-300)
    if abs(phi[0]) > 1e-12 * scale:
        raise ValueError("phi must vanish at the Dirichlet end x = 0")
    h = mesh.h
    slope = (3 * phi[-1] - 4 * phi[-2] + phi[-3]) / (2 * h)
    if abs(slope) > boundary_tol * scale:
        raise ValueError("phi must have zero slope at the Neumann end x = 1")
    t = grid.times
    ps, ptt = _sample(psi, t), _sample(psi_tt, t)
    if abs(ps[0]) > 1e-12 * max(np.max(np.abs(ps)), 1e-300):
        raise ValueError("psi(0) must vanish")
    if caputo_psi is not None:
        cap = _sample(caputo_psi, t)
    else:
        frac = integrate(build_weights(grid, 1.0 - params.alpha), ps)
        cap = np.gradient(frac, grid.dt, edge_order=2)
    A = assemble_stiffness(mesh)
    M = assemble_weighted_mass(mesh, np.ones(mesh.n_nodes))
    a_phi = np.zeros(mesh.n_nodes)
    a_phi[1:] = solve_tridiagonal(M, A.matvec(phi[1:]))
    slow = mesh.field(params.slowness)
    r = (np.outer(ptt, slow * phi) + np.outer(ps, a_phi)
         + params.b_damp * np.outer(cap, a_phi))
    return Excitation(samples=r)


def laplace_transform(samples: np.ndarray, grid: TimeGrid, z: complex,
                      decay_tol: float = 1e-8) -> complex:
    """Truncated Laplace transform ``int_0^T e^{-zt} f(t) dt``.

    Trapezoid rule with the Euler-Maclaurin end correction; refuses integrands
    ``e^{-zt} f(t)`` that have not decayed by ``T`` (relative to their peak).
    """
    g = np.exp(-z * grid.times) * np.asarray(samples, dtype=float)
    peak = np.max(np.abs(g))
    if peak > 0 and np.max(np.abs(g[-5:])) > decay_tol * peak:
        raise ValueError("integrand has not decayed at the end of the horizon; truncation unsafe")
    return _corrected_trapezoid(g, grid.dt)


def _corrected_trapezoid(g: np.ndarray, dt: float) -> complex:
    s = dt * (np.sum(g) - 0.5 * (g[0] + g[-1]))
    # fourth order one-sided first derivatives at both ends
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * dt)
    d0 = c @ g[:5]
    d1 = -(c @ g[::-1][:5])
    return complex(s - dt * dt / 12.0 * (d1 - d0))


def _signal_derivatives(psi, grid: TimeGrid):
    """``(psi, psi', psi'')`` samples from a sample array, callable or 3-tuple."""
    t = grid.times
    if isinstance(psi, tuple):
        return tuple(_sample(f, t) for f in psi)
    p = _sample(psi, t)
    d1 = np.gradient(p, grid.dt, edge_order=2)
    return p, d1, np.gradient(d1, grid.dt, edge_order=2)


def determinant_condition(psi1, psi2, poles: Sequence[complex], grid: TimeGrid) -> list:
    """``|det [[L psi1''(p), L (psi1^2)''(p)], [L psi2''(p), L (psi2^2)''(p)]]|`` per pole."""
    rows = []
    for psi in (psi1, psi2):
        p, d1, d2 = _signal_derivatives(psi, grid)
        rows.append((d2, 2.0 * d1 * d1 + 2.0 * p * d2))
    out = []
    for z in poles:
        if np.real(z) > 0:
            raise ValueError("poles must have nonpositive real part")
        m = np.array([[laplace_transform(a, grid, z), laplace_transform(b, grid, z)]
                      for a, b in rows])
        out.append((complex(z), float(abs(np.linalg.det(m)))))
    return out


def min_square_transform(psi, poles: Sequence[complex], grid: TimeGrid) -> float:
    """``min_p |L (psi^2)''(p)|`` over the given poles (nonvanishing check on a finite set)."""
    p, d1, d2 = _signal_derivatives(psi, grid)
    sq = 2.0 * d1 * d1 + 2.0 * p * d2
    return float(min(abs(laplace_transform(sq, grid, z)) for z in poles))


def default_signals():
    psi1 = (lambda t: t ** 2 * np.exp(-t), lambda t: (2 * t - t ** 2) * np.exp(-t),
            lambda t: (2 - 4 * t + t ** 2) * np.exp(-t))
    psi2 = (lambda t: t ** 3 * np.exp(-t), lambda t: (3 * t ** 2 - t ** 3) * np.exp(-t),
            lambda t: (6 * t - 6 * t ** 2 + t ** 3) * np.exp(-t))
    return psi1, psi2


def spectral_table(count: int = 10, b: float = 0.2, c: float = 1.0, beta_tilde: float = 0.0,
                   psi1=None, psi2=None, grid: Optional[TimeGrid] = None) -> list:
    """Rows ``(j, lambda, re_p, im_p, re_res, im_res, abs_det)`` for the first modes."""
    grid = grid or TimeGrid(8000, 40.0)
    d1, d2 = default_signals()
    psi1 = d1 if psi1 is None else psi1
    psi2 = d2 if psi2 is None else psi2
    pairs = [poles_and_residue(e.lam, b, c, beta_tilde) for e in eigenpairs_dn(count, Mesh1D(10))]
    dets = determinant_condition(psi1, psi2, [q.p_plus for q in pairs], grid)
    rows = []
    for j, (q, (_, d)) in enumerate(zip(pairs, dets), start=1):
        lam = ((j - 0.5) * np.pi) ** 2
        rows.append((j, lam, q.p_plus.real, q.p_plus.imag, q.residue_plus.real,
                     q.residue_plus.imag, d))
    return rows


def write_spectral_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lambda", "re_p", "im_p", "re_res", "im_res", "abs_det"])
        for r in rows:
            w.writerow([r[0]] + [f"{v:.17g}" for v in r[1:]])
