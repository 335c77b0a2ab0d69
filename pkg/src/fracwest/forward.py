"""Time stepping of the once time-integrated fractionally damped Westervelt model.

The discrete problem at each step is

    M_{s - 2 k ubar} (u^{n+1} - u^n) / dt
      + b/2 A (J_b u^{n+1} + J_b u^n) + 1/2 A (J_1 u^{n+1} + J_1 u^n)
      = 1/2 M (R^{n+1} + R^n)

with ``J_b`` the product-trapezoidal Abel integral of order ``b = 1 - alpha``,
``J_1`` the trapezoid running integral, ``R`` the running integral of the
excitation and ``ubar`` the extrapolated state ``(3u^n - u^{n-1})/2``.
For ``kappa = 0`` and no damping this is the Crank-Nicolson scheme of the
first order system ``(u, I^1 u)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fracquad import TimeGrid, apply_history, build_weights, implicit_weight
from .mesh1d import (BandMatrix, Mesh1D, SingularPivotError, TridiagonalFactor,
                     assemble_stiffness, assemble_weighted_mass, solve_tridiagonal)

DEFAULT_SIGMA = (0.1, 1.0)
DEGENERACY_FRACTION = 0.1


class SolverError(RuntimeError):
    def __init__(self, msg: str, step: Optional[int] = None):
        super().__init__(msg if step is None else f"step {step}: {msg}")
        self.step = step


class DegeneracyError(SolverError):
    """The leading coefficient ``s - 2 k u`` fell below the admissible floor."""


@dataclass
class Excitation:
    """Source term, either as a vectorized callable ``r(x, t)`` or as nodal samples.

    ``samples`` must have shape ``(n_steps + 1, n_nodes)`` of the grid it is
    used on; a callable can be sampled on any mesh/grid pair.
    """

    func: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    samples: Optional[np.ndarray] = None

    def sample(self, mesh: Mesh1D, grid: TimeGrid) -> np.ndarray:
        shape = (grid.n_steps + 1, mesh.n_nodes)
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=float)
            if s.shape != shape:
                raise ValueError(f"excitation samples have shape {s.shape}, expected {shape}")
            return s
        if self.func is None:
            return np.zeros(shape)
        t, x = np.meshgrid(grid.times, mesh.nodes, indexing="ij")
        return np.broadcast_to(np.asarray(self.func(x, t), dtype=float), shape).copy()

    def scaled(self, a: float) -> "Excitation":
        if self.samples is not None:
            return Excitation(samples=a * np.asarray(self.samples))
        if self.func is None:
            return Excitation()
        f = self.func
        return Excitation(func=lambda x, t: a * f(x, t))


@dataclass
class ModelParams:
    kappa: np.ndarray
    slowness: np.ndarray
    source: Excitation = field(default_factory=Excitation)
    alpha: float = 0.5
    b_damp: float = 0.1

    def __post_init__(self):
        self.kappa = np.asarray(self.kappa, dtype=float)
        self.slowness = np.asarray(self.slowness, dtype=float)
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.b_damp < 0:
            raise ValueError("b_damp must be nonnegative")
        if self.kappa.shape != self.slowness.shape:
            raise ValueError("kappa and slowness must have the same length")
        if not np.min(self.slowness) > 0:
            raise ValueError("slowness must be positive")

    @classmethod
    def homogeneous(cls, mesh: Mesh1D, source: Excitation = None, **kw) -> "ModelParams":
        return cls(np.zeros(mesh.n_nodes), np.ones(mesh.n_nodes),
                   source if source is not None else Excitation(), **kw)

    def with_coefficients(self, kappa, slowness) -> "ModelParams":
        return ModelParams(kappa, slowness, self.source, self.alpha, self.b_damp)


@dataclass
class StateHistory:
    """Nodal solution ``u[n, i] = u(x_i, t_n)``, Dirichlet node included."""

    u: np.ndarray
    mesh: Mesh1D
    grid: TimeGrid
    min_coefficient: float = np.nan

    @property
    def ut(self) -> np.ndarray:
        return np.gradient(self.u, self.grid.dt, axis=0, edge_order=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            for n, t in enumerate(self.grid.times):
                for i, x in enumerate(self.mesh.nodes):
                    w.writerow([f"{t:.17g}", f"{x:.17g}", f"{self.u[n, i]:.17g}"])


@dataclass
class Trace:
    locations: tuple
    samples: np.ndarray  # (n_steps + 1, len(locations))


class _Stepper:
    """Shared marching machinery for the nonlinear and linearized problems."""

    def __init__(self, mesh: Mesh1D, grid: TimeGrid, alpha: float, b_damp: float):
        self.mesh, self.grid, self.b = mesh, grid, b_damp
        self.dt = grid.dt
        self.A = assemble_stiffness(mesh)
        self.M1 = assemble_weighted_mass(mesh, np.ones(mesh.n_nodes))
        self.wf = build_weights(grid, 1.0 - alpha)
        self.w1 = build_weights(grid, 1.0)
        self.stiff_coef = 0.5 * (b_damp * implicit_weight(self.wf, 1) + implicit_weight(self.w1, 1))

    def system(self, mass: BandMatrix) -> BandMatrix:
        return mass * (1.0 / self.dt) + self.A * self.stiff_coef

    def march(self, rhs_fn, mass_fn=None, factor: TridiagonalFactor = None,
              mass_const: BandMatrix = None, shape=()):
        """Advance ``n_steps`` steps.

        ``rhs_fn(n, U)`` returns the explicit forcing of step ``n -> n+1``;
        ``mass_fn(n, U)`` returns the (possibly state dependent) mass matrix,
        or ``mass_const`` / ``factor`` give a fixed one.
        """
        N, nf = self.grid.n_steps, self.mesh.n_free
        U = np.zeros((N + 1, nf) + shape)
        Jf = np.zeros_like(U)
        J1 = np.zeros_like(U)
        A = self.A
        for n in range(N):
            try:
                mass = mass_const if mass_fn is None else mass_fn(n, U)
                hf = apply_history(self.wf, U, n + 1)
                h1 = apply_history(self.w1, U, n + 1)
                rhs = (mass.matvec(U[n]) / self.dt
                       - 0.5 * A.matvec(self.b * (hf + Jf[n]) + h1 + J1[n])
                       + rhs_fn(n, U))
                if factor is not None and mass_fn is None:
                    U[n + 1] = factor.solve(rhs)
                else:
                    U[n + 1] = solve_tridiagonal(self.system(mass), rhs)
            except SingularPivotError as exc:
                raise SolverError(str(exc), step=n + 1) from exc
            Jf[n + 1] = hf + implicit_weight(self.wf, n + 1) * U[n + 1]
            J1[n + 1] = h1 + implicit_weight(self.w1, n + 1) * U[n + 1]
        return U

    def full(self, U: np.ndarray) -> np.ndarray:
        """Prepend the eliminated Dirichlet node."""
        out = np.zeros((U.shape[0], self.mesh.n_nodes) + U.shape[2:])
        out[:, 1:] = U
        return out


def integrated_source(source: Excitation, mesh: Mesh1D, grid: TimeGrid) -> np.ndarray:
    """Trapezoid running integral of the excitation at the free nodes."""
    r = source.sample(mesh, grid)[:, 1:]
    out = np.zeros_like(r)
    out[1:] = np.cumsum(0.5 * grid.dt * (r[1:] + r[:-1]), axis=0)
    return out


def run(params: ModelParams, mesh: Mesh1D, grid: TimeGrid) -> StateHistory:
    """Solve the nonlinear forward problem with zero initial data."""
    kappa, slow = mesh.field(params.kappa), mesh.field(params.slowness)
    st = _Stepper(mesh, grid, params.alpha, params.b_damp)
    R = integrated_source(params.source, mesh, grid)
    MR = st.M1.matvec(R.T).T
    floor = DEGENERACY_FRACTION * float(np.min(slow))
    linear = not np.any(kappa)
    state = {"min": float(np.min(slow))}
    ubar = np.zeros(mesh.n_nodes)

    def mass_fn(n, U):
        ubar[1:] = U[n] if n == 0 else 1.5 * U[n] - 0.5 * U[n - 1]
        coef = slow - 2.0 * kappa * ubar
        cmin = float(np.min(coef))
        state["min"] = min(state["min"], cmin)
        if cmin < floor:
            raise DegeneracyError(
                f"coefficient slowness - 2 kappa u reached {cmin:.4g} < {floor:.4g}", step=n + 1)
        return assemble_weighted_mass(mesh, coef)

    def rhs_fn(n, U):
        return 0.5 * (MR[n + 1] + MR[n])

    if linear:
        mass = assemble_weighted_mass(mesh, slow)
        U = st.march(rhs_fn, mass_const=mass, factor=TridiagonalFactor(st.system(mass)))
    else:
        U = st.march(rhs_fn, mass_fn=mass_fn)
    return StateHistory(st.full(U), mesh, grid, state["min"])


def step(U: np.ndarray, n: int, params: ModelParams, mesh: Mesh1D, grid: TimeGrid,
         ) -> np.ndarray:
    """Single step ``n -> n+1`` given the free-node history ``U[0..n]``.

    Provided for inspection; :func:`run` carries the running integrals
    instead of recomputing them.
    """
    kappa, slow = mesh.field(params.kappa), mesh.field(params.slowness)
    st = _Stepper(mesh, grid, params.alpha, params.b_damp)
    R = integrated_source(params.source, mesh, grid)
    ubar = np.zeros(mesh.n_nodes)
    ubar[1:] = U[n] if n == 0 else 1.5 * U[n] - 0.5 * U[n - 1]
    coef = slow - 2.0 * kappa * ubar
    floor = DEGENERACY_FRACTION * float(np.min(slow))
    if np.min(coef) < floor:
        raise DegeneracyError("degenerate leading coefficient", step=n + 1)
    mass = assemble_weighted_mass(mesh, coef)
    hist = U[: n + 1]
    Jf_n = apply_history(st.wf, hist, n) + implicit_weight(st.wf, n) * U[n]
    J1_n = apply_history(st.w1, hist, n) + implicit_weight(st.w1, n) * U[n]
    hf = apply_history(st.wf, hist, n + 1)
    h1 = apply_history(st.w1, hist, n + 1)
    rhs = (mass.matvec(U[n]) / grid.dt
           - 0.5 * st.A.matvec(params.b_damp * (hf + Jf_n) + h1 + J1_n)
           + 0.5 * st.M1.matvec(R[n + 1] + R[n]))
    try:
        return solve_tridiagonal(st.system(mass), rhs)
    except SingularPivotError as exc:
        raise SolverError(str(exc), step=n + 1) from exc


def observe(history: StateHistory, locations=DEFAULT_SIGMA) -> Trace:
    idx = [history.mesh.node_index(x) for x in locations]
    return Trace(tuple(float(x) for x in locations), history.u[:, idx].copy())


def energy_e0(history: StateHistory, params: ModelParams, mesh: Mesh1D, n: int) -> float:
    """Low order energy ``1/2 (u_t' M_s u_t + u' A u)`` at step ``n``."""
    if not 1 <= n <= history.grid.n_steps - 1:
        raise IndexError("energy needs 1 <= n <= n_steps - 1")
    u = history.u[n, 1:]
    ut = (history.u[n + 1, 1:] - history.u[n - 1, 1:]) / (2.0 * history.grid.dt)
    Ms = assemble_weighted_mass(mesh, params.slowness)
    A = assemble_stiffness(mesh)
    return 0.5 * float(ut @ Ms.matvec(ut) + u @ A.matvec(u))


def energy_series(history: StateHistory, params: ModelParams) -> np.ndarray:
    """E0 at steps 1..n_steps-1 (index 0 of the result is step 1)."""
    mesh = history.mesh
    Ms = assemble_weighted_mass(mesh, params.slowness)
    A = assemble_stiffness(mesh)
    u = history.u[1:-1, 1:]
    ut = (history.u[2:, 1:] - history.u[:-2, 1:]) / (2.0 * history.grid.dt)
    return 0.5 * (np.einsum("ni,in->n", ut, Ms.matvec(ut.T)) + np.einsum("ni,in->n", u, A.matvec(u.T)))
