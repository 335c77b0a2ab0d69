"""Frozen linearization of the coefficient-to-trace map and its SVD.

The linearized scheme is the exact derivative of the discrete forward scheme
at ``kappa = 0``: perturbing the mass weight ``s - 2 k ubar`` gives the
forcing ``-M_{ds - 2 dk ubar0} (u0^{n+1} - u0^n) / dt`` per step.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .forward import (DEFAULT_SIGMA, ModelParams, SolverError, StateHistory, Trace,
                      _Stepper, observe)
from .fracquad import TimeGrid
from .mesh1d import Mesh1D, TridiagonalFactor, assemble_weighted_mass


@dataclass
class JacobianMatrix:
    k: np.ndarray             # (n_sensors * (n_steps+1), 2 * n_free)
    row_weights: np.ndarray   # trapezoid weights per row
    sigma: tuple
    n_free: int

    @property
    def weighted(self) -> np.ndarray:
        return np.sqrt(self.row_weights)[:, None] * self.k

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.k @ p


@dataclass
class SvdResult:
    singular_values: np.ndarray
    u: np.ndarray
    vt: np.ndarray
    sweeps: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "sigma_k"])
            for i, s in enumerate(self.singular_values, start=1):
                w.writerow([i, f"{s:.17g}"])


def stack_trace(samples: np.ndarray) -> np.ndarray:
    """Trace samples ``(n_times, n_sensors)`` -> sensor-major stacked vector."""
    return np.asarray(samples, dtype=float).T.reshape(-1)


def unstack_trace(y: np.ndarray, n_sensors: int) -> np.ndarray:
    return np.asarray(y).reshape(n_sensors, -1).T


def trace_weights(grid: TimeGrid, n_sensors: int) -> np.ndarray:
    return np.tile(grid.trapezoid_weights(), n_sensors)


def split_params(p: np.ndarray, mesh: Mesh1D):
    """Stacked free-node vector ``(dk, ds)`` -> full nodal fields (node 0 fixed at 0)."""
    nf = mesh.n_free
    p = np.asarray(p, dtype=float)
    dk = np.zeros((mesh.n_nodes,) + p.shape[1:])
    ds = np.zeros_like(dk)
    dk[1:] = p[:nf]
    ds[1:] = p[nf:]
    return dk, ds


def _check_frozen(params: ModelParams):
    if np.any(params.kappa):
        raise ValueError("the frozen linearization is only defined at kappa = 0")


def _background_increments(background: StateHistory):
    u = background.u
    n_steps = u.shape[0] - 1
    ubar = np.empty_like(u[:-1])
    ubar[0] = u[0]
    ubar[1:] = 1.5 * u[1:n_steps] - 0.5 * u[: n_steps - 1]
    return ubar, np.diff(u, axis=0)


def _linearized_free(background, dkappa, dslow, params, mesh, grid):
    _check_frozen(params)
    if background.u.shape != (grid.n_steps + 1, mesh.n_nodes):
        raise ValueError("background history does not match mesh/grid")
    st = _Stepper(mesh, grid, params.alpha, params.b_damp)
    mass = assemble_weighted_mass(mesh, params.slowness)
    factor = TridiagonalFactor(st.system(mass))
    dk = np.asarray(dkappa, dtype=float)
    ds = np.asarray(dslow, dtype=float)
    if dk.shape[0] != mesh.n_nodes or ds.shape != dk.shape:
        raise ValueError("perturbations must be nodal fields of equal shape")
    ubar, du = _background_increments(background)
    cols = dk.shape[1:]
    inv_dt = 1.0 / grid.dt

    def rhs_fn(n, U):
        w = ds - 2.0 * dk * ubar[n].reshape((-1,) + (1,) * len(cols))
        if not cols:
            return -inv_dt * assemble_weighted_mass(mesh, w).matvec(du[n, 1:])
        out = np.empty((mesh.n_free,) + cols)
        flat_w = w.reshape(mesh.n_nodes, -1)
        flat_o = out.reshape(mesh.n_free, -1)
        for j in range(flat_w.shape[1]):
            flat_o[:, j] = -inv_dt * assemble_weighted_mass(mesh, flat_w[:, j]).matvec(du[n, 1:])
        return out

    U = st.march(rhs_fn, mass_const=mass, factor=factor, shape=cols)
    return st.full(U)


def solve_linearized(background: StateHistory, dkappa, dslow, params: ModelParams,
                     mesh: Mesh1D, grid: TimeGrid) -> StateHistory:
    """Linearized response to coefficient perturbations ``(dkappa, dslow)``."""
    u = _linearized_free(background, mesh.field(dkappa), mesh.field(dslow), params, mesh, grid)
    return StateHistory(u, mesh, grid)


def _hat_mass_entries(mesh: Mesh1D, q: int):
    """Nonzero (row, col, value) of ``M_{e_q}`` in free-node numbering."""
    e = np.zeros(mesh.n_nodes)
    e[q] = 1.0
    m = assemble_weighted_mass(mesh, e)
    lo, hi = max(q - 2, 0), min(q, mesh.n_free - 1)
    out = []
    for i in range(lo, hi + 1):
        for j in range(max(i - 1, lo), min(i + 1, hi) + 1):
            v = m.diag[i] if i == j else (m.upper[i] if j == i + 1 else m.lower[j])
            if v != 0.0:
                out.append((i, j, v))
    return out


def _column_reciprocity(entries, q, kind, Hhat, du, ubar, L, n_steps, dt):
    if kind == "kappa":
        c = -2.0 * ubar[:, q]
    else:
        c = np.ones(n_steps)
    rows = sorted({i for i, _, _ in entries})
    acc = np.zeros(Hhat.shape[:1] + (L // 2 + 1,), dtype=complex)
    for i in rows:
        g = np.zeros(n_steps)
        for ii, j, v in entries:
            if ii == i:
                g += v * du[:, j + 1]
        ghat = np.fft.rfft(-c * g / dt, n=L)
        acc += Hhat[:, i, :] * ghat
    y = np.fft.irfft(acc, n=L)[:, :n_steps]
    out = np.zeros((Hhat.shape[0], n_steps + 1))
    out[:, 1:] = y
    return out.reshape(-1)


def assemble(background: StateHistory, params: ModelParams, mesh: Mesh1D, grid: TimeGrid,
             sigma: Sequence[float] = DEFAULT_SIGMA, method: str = "reciprocity",
             columns: Optional[Sequence[int]] = None, workers: Optional[int] = None,
             ) -> JacobianMatrix:
    """Dense frozen Jacobian; columns are (all kappa nodes, all slowness nodes), node-ascending.

    ``method="direct"`` runs one linearized solve per column. The default
    ``"reciprocity"`` uses symmetry of the discrete Green's function: the
    scheme is time invariant, so two impulse responses (one per sensor)
    convolved with each column's forcing give the same columns.
    """
    _check_frozen(params)
    nf = mesh.n_free
    ncol = 2 * nf
    order = list(range(ncol)) if columns is None else list(columns)
    if sorted(order) != list(range(ncol)):
        raise ValueError("columns must be a permutation of all column indices")
    sensors = [mesh.node_index(x) for x in sigma]
    if 0 in sensors:
        raise ValueError("the Dirichlet node carries no information")
    n_steps = grid.n_steps
    K = np.zeros((len(sensors) * (n_steps + 1), ncol))

    if method == "direct":
        def column(j):
            p = np.zeros(ncol)
            p[j] = 1.0
            dk, ds = split_params(p, mesh)
            h = StateHistory(_linearized_free(background, dk, ds, params, mesh, grid), mesh, grid)
            return stack_trace(observe(h, sigma).samples)
    elif method == "reciprocity":
        st = _Stepper(mesh, grid, params.alpha, params.b_damp)
        mass = assemble_weighted_mass(mesh, params.slowness)
        factor = TridiagonalFactor(st.system(mass))
        imp = np.zeros((nf, len(sensors)))
        for s, node in enumerate(sensors):
            imp[node - 1, s] = 1.0

        def rhs_fn(n, U):
            return imp if n == 0 else np.zeros_like(imp)

        G = st.march(rhs_fn, mass_const=mass, factor=factor, shape=(len(sensors),))
        L = 1 << int(np.ceil(np.log2(2 * n_steps)))
        # Hhat[s, i, f]: transform of the impulse response at free node i for sensor s
        Hhat = np.fft.rfft(np.transpose(G[1:], (2, 1, 0)), n=L, axis=-1)
        ubar, du = _background_increments(background)
        hat_entries = {q: _hat_mass_entries(mesh, q) for q in range(1, nf + 1)}

        def column(j):
            kind, q = ("kappa", j + 1) if j < nf else ("slowness", j - nf + 1)
            return _column_reciprocity(hat_entries[q], q, kind, Hhat, du, ubar, L, n_steps, grid.dt)
    else:
        raise ValueError(f"unknown assembly method {method!r}")

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(column, order))
    else:
        results = [column(j) for j in order]
    for j, col in zip(order, results):
        K[:, j] = col
    if not np.all(np.isfinite(K)):
        raise SolverError("non-finite Jacobian entries")
    return JacobianMatrix(K, trace_weights(grid, len(sensors)), tuple(sigma), nf)


def adjoint_apply(kmat: JacobianMatrix, residual) -> np.ndarray:
    """``K^* y`` for the dt-weighted trace inner product; accepts a Trace or stacked vector."""
    y = stack_trace(residual.samples) if isinstance(residual, Trace) else np.asarray(residual, float)
    if y.shape != (kmat.k.shape[0],):
        raise ValueError(f"residual has shape {y.shape}, expected ({kmat.k.shape[0]},)")
    return kmat.k.T @ (kmat.row_weights * y)


def _round_robin(n: int):
    """Pairings for one Jacobi sweep: n-1 rounds of n/2 disjoint pairs (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> SvdResult:
    """One-sided (Hestenes) Jacobi SVD with QR preconditioning for tall matrices."""
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    transpose = m < n
    if transpose:
        a = a.T
        m, n = n, m
    # normalize so squared column norms neither underflow nor overflow
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    if amax == 0.0 or not np.isfinite(amax):
        amax = 1.0
    q, r = np.linalg.qr(a / amax)
    npad = n + (n % 2)
    W = np.zeros((n, npad))
    W[:, :n] = r
    V = np.eye(npad)
    rounds = _round_robin(npad)
    # columns below roundoff of the whole matrix are numerically zero
    floor = (np.finfo(float).eps * np.linalg.norm(r)) ** 2
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for P, Q in rounds:
            wp, wq = W[:, P], W[:, Q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gam = np.einsum("ij,ij->j", wp, wq)
            active = (np.abs(gam) > tol * np.sqrt(alpha * beta)) & (np.minimum(alpha, beta) > floor)
            if not np.any(active):
                continue
            rotated = True
            zeta = np.where(active, (beta - alpha) / np.where(active, 2.0 * gam, 1.0), 0.0)
            t = np.where(active, np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta)), 0.0)
            t = np.where(active & (zeta == 0), 1.0, t)
            cs = 1.0 / np.sqrt(1.0 + t ** 2)
            sn = cs * t
            W[:, P], W[:, Q] = cs * wp - sn * wq, sn * wp + cs * wq
            vp, vq = V[:, P], V[:, Q]
            V[:, P], V[:, Q] = cs * vp - sn * vq, sn * vp + cs * vq
        if not rotated:
            break
    else:
        raise np.linalg.LinAlgError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    s = np.linalg.norm(W, axis=0) * amax
    idx = np.argsort(-s, kind="stable")[:n]
    s = s[idx]
    Ur = np.zeros((n, n))
    nz = s > 0
    Ur[:, nz] = W[:, idx[nz]] * amax / s[nz]
    Vr = V[:n, idx]
    U = q @ Ur
    if transpose:
        return SvdResult(s, Vr, U.T, sweep)
    return SvdResult(s, U, Vr.T, sweep)


def svd(kmat: JacobianMatrix) -> SvdResult:
    """SVD of the row-weighted matrix ``W^{1/2} K``."""
    return jacobi_svd(kmat.weighted)
