"""Command line entry point: ``fracwest <command> --config cfg.json [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (ConfigError, ExperimentConfig, alpha_sensitivity, calibrated_source,
                          dump_singular_values, loglinear_r2, make_truth, reconstruct, synthesize,
                          write_csv, write_meta, write_reconstruction, write_traces)
from .forward import ModelParams, SolverError, observe, run
from .fracquad import TimeGrid
from .mesh1d import Mesh1D
from .spectral import (check_pole_separation, default_signals, eigenpairs_dn, min_square_transform,
                       poles_and_residue, spectral_table, write_spectral_csv)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_NO_STOP = 0, 2, 3, 4

log = logging.getLogger("fracwest")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    return cfg


def cmd_forward(cfg, out: Path, args) -> int:
    mesh, grid = cfg.mesh(), cfg.grid()
    k, s = make_truth(cfg, mesh)
    hist = run(ModelParams(k, s, calibrated_source(cfg), cfg.alpha, cfg.b_damp), mesh, grid)
    hist.to_csv(out / "history.csv")
    tr = observe(hist, tuple(cfg.sigma))
    write_csv(out / "trace.csv", ["t"] + [f"u_{x:g}" for x in cfg.sigma],
              [[t] + list(row) for t, row in zip(grid.times, tr.samples)])
    write_meta(out, cfg, min_coefficient=hist.min_coefficient,
               max_abs_u=float(np.max(np.abs(hist.u))))
    return EXIT_OK


def cmd_synth(cfg, out: Path, args) -> int:
    data = synthesize(cfg)
    write_traces(data, cfg, out)
    write_meta(out, cfg, delta=data.delta, clean_norm=data.clean_norm)
    return EXIT_OK


def cmd_reconstruct(cfg, out: Path, args) -> int:
    rec = reconstruct(cfg)
    write_reconstruction(rec, out)
    write_traces(rec.data, cfg, out)
    st = rec.state
    write_meta(out, cfg, delta=rec.data.delta, iterations=st.n_iter,
               stopped_by_discrepancy=st.stopped_by_discrepancy,
               final_residual=st.residual_norms[-1],
               err_kappa_L2_03_1=rec.kappa_error((0.3, 1.0)),
               err_slowness_L2=rec.slowness_error())
    if cfg.noise_rel > 0 and not st.stopped_by_discrepancy:
        log.warning("discrepancy principle not satisfied within %d iterations", cfg.max_iters)
        return EXIT_NO_STOP
    return EXIT_OK


def cmd_svd(cfg, out: Path, args) -> int:
    res = dump_singular_values(cfg, out)
    sv = res.singular_values
    write_meta(out, cfg, r2_top30=loglinear_r2(sv, 30), sigma10_over_sigma1=float(sv[9] / sv[0]))
    return EXIT_OK


def cmd_spectral(cfg, out: Path, args) -> int:
    write_spectral_csv(spectral_table(args.modes, args.b, args.c), out / "spectral.csv")
    lams = [e.lam for e in eigenpairs_dn(args.modes, Mesh1D(10))]
    poles = [poles_and_residue(lam, args.b, args.c).p_plus for lam in lams]
    psi1, _ = default_signals()
    write_meta(out, cfg, modes=args.modes, b=args.b, c=args.c,
               poles_separated=check_pole_separation(lams, args.b, args.c),
               min_abs_square_transform=min_square_transform(psi1, poles, TimeGrid(8000, 40.0)))
    return EXIT_OK


def cmd_alpha_sweep(cfg, out: Path, args) -> int:
    try:
        alphas = [float(a) for a in args.alphas.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --alphas: {args.alphas}") from exc
    alpha_sensitivity(cfg, alphas, out)
    write_meta(out, cfg, alphas=alphas)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "svd": cmd_svd,
    "spectral-check": cmd_spectral,
    "alpha-sweep": cmd_alpha_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracwest", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat JSON experiment config")
    p.add_argument("--seed", type=int, help="override rng_seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--alphas", default="0.3,0.5,0.7", help="alpha-sweep: comma separated")
    p.add_argument("--modes", type=int, default=10, help="spectral-check: number of modes")
    p.add_argument("--b", type=float, default=0.2, help="spectral-check: damping b")
    p.add_argument("--c", type=float, default=1.0, help="spectral-check: wave speed c")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "alpha-sweep":
            try:
                alphas = [float(a) for a in args.alphas.split(",")]
            except ValueError as exc:
                raise ConfigError(f"bad --alphas: {args.alphas}") from exc
            if any(not 0 < a < 1 for a in alphas):
                raise ConfigError(f"all alphas must lie in (0, 1), got {args.alphas}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
