"""Synthetic experiments: truth presets, data synthesis, reconstructions, sweeps.

Presets (amplitudes, widths, source shape, grids) are invented; they are
chosen to exhibit the qualitative behaviour of the three test cases:
single-signed pressure on the nonlinearity support (A), the reversed sign
with its cancellation between the two coefficients (B), and loss of
information near the Dirichlet end (C).
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .forward import Excitation, ModelParams, observe, run
from .fracquad import TimeGrid
from .jacobian import assemble, stack_trace, svd, unstack_trace
from .mesh1d import Mesh1D
from .newton import InverseProblem, NewtonConfig, NewtonState, relative_l2_error, run_newton

log = logging.getLogger(__name__)

CASES = ("A", "B", "C", "custom")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    case: str = "A"
    alpha: float = 0.5
    b_damp: float = 1.0
    noise_rel: float = 0.001
    n_cells: int = 200
    n_steps: int = 1000
    T: float = 2.0
    synth_refine: int = 2
    sigma: list = field(default_factory=lambda: [0.1, 1.0])
    # source: sign * amp * exp(-((x-c)/w)^2 / 2) * a_k sin^2(2 pi f t) on lobe k,
    # lobe k being t in [k/(2f), (k+1)/(2f)), a_k = source_lobes[k]
    source_center: float = 0.05
    source_width: float = 0.1
    source_frequency: float = 1.0 / 1.4
    source_lobes: list = field(default_factory=lambda: [1.0, 0.4])
    source_sign: Optional[float] = None     # None -> from case (A, C: -1; B: +1)
    target_max_u: float = 0.3
    # truth profiles: lists of [center, width, amplitude] for exp(-((x-c)/w)^2)
    kappa_bumps: Optional[list] = None
    slowness_bumps: Optional[list] = None
    # Newton
    alpha0: float = 1.0
    theta: float = 0.5
    max_iters: int = 20
    penalty_weight: float = 1e-7
    tau_discrepancy: float = 1.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.noise_rel < 0:
            raise ConfigError("noise_rel must be nonnegative")
        if self.synth_refine < 2:
            raise ConfigError("synthesis grid must be strictly finer than the inversion grid")
        if self.n_cells <= 0 or self.n_cells % 10:
            raise ConfigError("n_cells must be a positive multiple of 10")
        if not self.source_lobes or self.source_frequency <= 0:
            raise ConfigError("source needs a positive frequency and at least one lobe")
        if self.n_steps <= 0 or not self.T > 0:
            raise ConfigError("n_steps and T must be positive")
        if self.case == "custom" and (self.kappa_bumps is None or self.slowness_bumps is None):
            raise ConfigError("case 'custom' needs kappa_bumps and slowness_bumps")
        try:
            self.newton_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def mesh(self, refine: int = 1) -> Mesh1D:
        return Mesh1D(self.n_cells * refine)

    def grid(self, refine: int = 1) -> TimeGrid:
        return TimeGrid(self.n_steps * refine, self.T)

    def newton_config(self, delta: float = 0.0) -> NewtonConfig:
        return NewtonConfig(self.alpha0, self.theta, self.max_iters, self.penalty_weight,
                            self.tau_discrepancy, delta)


PRESETS = {
    "A": {"kappa": [[0.65, 0.1, 0.2]], "slowness": [[0.5, 0.15, 0.1]], "sign": -1.0},
    "B": {"kappa": [[0.65, 0.1, 0.2]], "slowness": [[0.5, 0.15, 0.1]], "sign": 1.0},
    "C": {"kappa": [[0.15, 0.07, 0.2], [0.75, 0.07, 0.2]], "slowness": [[0.5, 0.15, 0.1]],
          "sign": -1.0},
}


def _bumps(bumps):
    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, w, a in bumps:
            out += a * np.exp(-(((x - c) / w) ** 2))
        return out
    return f


def truth_functions(cfg: ExperimentConfig):
    if cfg.case == "custom":
        kb, sb = cfg.kappa_bumps, cfg.slowness_bumps
    else:
        kb = cfg.kappa_bumps or PRESETS[cfg.case]["kappa"]
        sb = cfg.slowness_bumps or PRESETS[cfg.case]["slowness"]
    k, s = _bumps(kb), _bumps(sb)
    return k, (lambda x: 1.0 + s(x))


def make_truth(case, mesh: Optional[Mesh1D] = None):
    """Nodal ``(kappa_true, slowness_true)`` of a preset case (or config) on ``mesh``."""
    cfg = case if isinstance(case, ExperimentConfig) else ExperimentConfig(case=case)
    mesh = mesh or cfg.mesh()
    k, s = truth_functions(cfg)
    return mesh.sample(k), mesh.sample(s)


def source_sign(cfg: ExperimentConfig) -> float:
    if cfg.source_sign is not None:
        return float(cfg.source_sign)
    return PRESETS.get(cfg.case, PRESETS["A"])["sign"]


def unit_source(cfg: ExperimentConfig) -> Excitation:
    c, w, f = cfg.source_center, cfg.source_width, cfg.source_frequency
    lobes = np.append(np.asarray(cfg.source_lobes, dtype=float), 0.0)

    def signal(t):
        k = np.minimum((2.0 * f * t).astype(int), len(lobes) - 1)
        return lobes[k] * np.sin(2.0 * np.pi * f * t) ** 2

    def r(x, t):
        return np.exp(-0.5 * ((x - c) / w) ** 2) * signal(t)
    return Excitation(func=r)


def calibrated_source(cfg: ExperimentConfig) -> Excitation:
    """Source scaled so the linear response peaks at ``target_max_u`` on the inversion grid."""
    mesh, grid = cfg.mesh(), cfg.grid()
    src = unit_source(cfg)
    h = run(ModelParams.homogeneous(mesh, src, alpha=cfg.alpha, b_damp=cfg.b_damp), mesh, grid)
    peak = float(np.max(np.abs(h.u)))
    return src.scaled(source_sign(cfg) * cfg.target_max_u / peak)


def template_params(cfg: ExperimentConfig, mesh: Mesh1D, source: Excitation) -> ModelParams:
    return ModelParams.homogeneous(mesh, source, alpha=cfg.alpha, b_damp=cfg.b_damp)


@dataclass
class NoisyData:
    clean: np.ndarray      # (n_steps + 1, n_sensors) on the inversion grid
    noisy: np.ndarray
    delta: float           # realized ||noisy - clean||_Y
    clean_norm: float


def y_norm(samples: np.ndarray, grid: TimeGrid) -> float:
    w = grid.trapezoid_weights()
    return float(np.sqrt(np.sum(w[:, None] * np.asarray(samples) ** 2)))


def synthesize(cfg: ExperimentConfig, source: Optional[Excitation] = None) -> NoisyData:
    """Fine-grid forward run at the true coefficients, restricted to the inversion grid, plus noise."""
    r = cfg.synth_refine
    if r < 2:
        raise ConfigError("synthesis grid must be strictly finer than the inversion grid")
    source = source or calibrated_source(cfg)
    fmesh, fgrid = cfg.mesh(r), cfg.grid(r)
    k, s = make_truth(cfg, fmesh)
    hist = run(ModelParams(k, s, source, cfg.alpha, cfg.b_damp), fmesh, fgrid)
    clean = observe(hist, tuple(cfg.sigma)).samples[::r]
    grid = cfg.grid()
    norm = y_norm(clean, grid)
    if cfg.noise_rel == 0:
        return NoisyData(clean, clean.copy(), 0.0, norm)
    rng = np.random.default_rng(cfg.rng_seed)
    noise = rng.standard_normal(clean.shape)
    noise *= cfg.noise_rel * norm / y_norm(noise, grid)
    noisy = clean + noise
    return NoisyData(clean, noisy, y_norm(noisy - clean, grid), norm)


@dataclass
class Reconstruction:
    cfg: ExperimentConfig
    state: NewtonState
    kappa_true: np.ndarray
    slowness_true: np.ndarray
    data: NoisyData
    mesh: Mesh1D

    def fields(self, n: Optional[int] = None):
        x = self.state.iterates[-1 if n is None else n]
        nf = self.mesh.n_free
        return (np.concatenate([[0.0], x[:nf]]), np.concatenate([[1.0], x[nf:]]))

    def kappa_error(self, interval=(0.0, 1.0), n: Optional[int] = None) -> float:
        return relative_l2_error(self.mesh, self.fields(n)[0], self.kappa_true, interval)

    def slowness_error(self, interval=(0.0, 1.0), n: Optional[int] = None) -> float:
        return relative_l2_error(self.mesh, self.fields(n)[1], self.slowness_true, interval)


def frozen_jacobian(cfg: ExperimentConfig, source: Excitation):
    mesh, grid = cfg.mesh(), cfg.grid()
    params = template_params(cfg, mesh, source)
    background = run(params, mesh, grid)
    return assemble(background, params, mesh, grid, tuple(cfg.sigma)), params


def reconstruct(cfg: ExperimentConfig, data: Optional[NoisyData] = None) -> Reconstruction:
    source = calibrated_source(cfg)
    if data is None:
        data = synthesize(cfg, source)
    mesh, grid = cfg.mesh(), cfg.grid()
    kmat, params = frozen_jacobian(cfg, source)
    k_true, s_true = make_truth(cfg, mesh)
    problem = InverseProblem(mesh, grid, params, kmat, stack_trace(data.noisy), tuple(cfg.sigma),
                             k_true, s_true)
    state = run_newton(cfg.newton_config(data.delta), problem)
    return Reconstruction(cfg, state, k_true, s_true, data, mesh)


# ---------------------------------------------------------------- output

def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else f"{v:.17g}" for v in row])


def write_meta(out: Path, cfg: ExperimentConfig, **extra) -> None:
    meta = {"version": __version__, "config": cfg.to_dict(), **extra}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def write_reconstruction(rec: Reconstruction, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    n_it = rec.state.n_iter
    x = rec.mesh.nodes
    for name, idx, truth in (("kappa", 0, rec.kappa_true), ("slowness", 1, rec.slowness_true)):
        cols = [rec.fields(n)[idx] for n in range(1, n_it + 1)]
        final = rec.fields()[idx]
        header = ["x", "true"] + [f"iter{n}" for n in range(1, n_it + 1)] + ["final"]
        rows = [[x[i], truth[i]] + [c[i] for c in cols] + [final[i]] for i in range(len(x))]
        write_csv(out / f"recon_{name}.csv", header, rows)
    rec.state.history_csv(out / "newton_history.csv")


def write_traces(data: NoisyData, cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    t = cfg.grid().times
    header = ["t"] + [f"clean_{s:g}" for s in cfg.sigma] + [f"noisy_{s:g}" for s in cfg.sigma]
    rows = [[t[n]] + list(data.clean[n]) + list(data.noisy[n]) for n in range(len(t))]
    write_csv(out / "traces.csv", header, rows)


def dump_singular_values(cfg: ExperimentConfig, out: Optional[Path] = None):
    kmat, _ = frozen_jacobian(cfg, calibrated_source(cfg))
    res = svd(kmat)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        res.to_csv(out / "sv.csv")
    return res


def loglinear_r2(values, top: int = 30) -> float:
    y = np.log(np.asarray(values[:top], dtype=float))
    k = np.arange(y.size)
    coef = np.polyfit(k, y, 1)
    resid = y - np.polyval(coef, k)
    return float(1.0 - resid @ resid / np.sum((y - y.mean()) ** 2))


def alpha_sensitivity(cfg: ExperimentConfig, alphas, out: Optional[Path] = None):
    alphas = [float(a) for a in alphas]
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ConfigError(f"all alphas must lie in (0, 1), got {alphas}")
    rows = []
    for a in alphas:
        rec = reconstruct(cfg.replace(case="A", alpha=a))
        rows.append([a, rec.state.n_iter, rec.kappa_error((0.3, 1.0)), rec.slowness_error()])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "alpha_sweep.csv",
                  ["alpha", "iterations", "err_kappa_L2_03_1", "err_slowness_L2"], rows)
    return rows
