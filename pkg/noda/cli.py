"""
noda — command-line surface.

Usage:
    noda generate --equation ks --n-traj 50 --tf 30 --dt 0.25 --resolution 128 --seed 0 --out data/ks
    noda train --data data/ks --config train.cfg --out model.nodm
    noda rollout --model model.nodm --traj data/ks/traj_00000.noda --alpha 0.1 --snr 30 \\
                 --th 10 --c identity --seed 0 --out est.noda
    noda eval --est est.noda --gt data/ks/traj_00000.noda --th 10 --csv scores.csv
    noda experiment --spec spec.json --out results/
    noda gradcheck --seed 0
    noda bench --model model.nodm --traj data/ks/traj_00000.noda

Exit codes: 0 success, 2 usage error, 3 data-format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from noda.config import APP_VERSION, settings
from noda.dataset import Equation, MeasurementOperator, observe, sample_schedule, split
from noda.errors import FormatError, MissingObservationError, NumericalError
from noda.ledger import get_ledger
from noda.logging import setup_logging

logger = logging.getLogger("noda.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4

GRADCHECK_TOLERANCE = 1e-5


def _resolution(text: str) -> int | tuple[int, int]:
    parts = [int(p) for p in text.split(",") if p.strip()]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError(f"resolution must be INT or INT,INT, got {text!r}")


def _record(command: str, args: argparse.Namespace, inputs=(), outputs=(), **extra) -> None:
    ledger = get_ledger()
    if ledger is None:
        return
    arg_dict = {k: v for k, v in vars(args).items() if k != "func"}
    ledger.record(command, arg_dict, inputs=list(inputs), outputs=list(outputs), **extra)


# ============================================================
# COMMANDS
# ============================================================

def cmd_generate(args: argparse.Namespace) -> int:
    from noda.solvers.factory import default_config, generate_trajectories
    from noda.trajectory_io import save_dataset

    equation = Equation.parse(args.equation)
    config = default_config(equation, resolution=args.resolution, h=args.dt, re=args.re)
    trajectories = generate_trajectories(equation, config, args.n_traj, args.tf, base_seed=args.seed)
    manifest = save_dataset(args.out, trajectories, metadata={
        "t_f": args.tf, "h": config.h, "grid": list(config.grid.shape),
        "length": config.grid.length, "re": getattr(config, "re", None),
        "base_seed": args.seed, "app_version": APP_VERSION,
    })
    print(f"Wrote {len(trajectories)} {equation.label} trajectories to {args.out}")
    _record("generate", args, outputs=[manifest], seeds=[t.seed for t in trajectories])
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from noda.checkpoint import save_checkpoint
    from noda.schemas.config import load_train_config
    from noda.trajectory_io import load_dataset
    from noda.training import train

    config = load_train_config(args.config)
    trajectories = load_dataset(args.data)
    if not trajectories:
        raise ValueError(f"no trajectories found in {args.data}")
    if config.n_train is not None:
        trajectories, _ = split(trajectories, config.n_train)
    result = train(trajectories, config)
    save_checkpoint(args.out, result.params, result.adam)
    print(f"Trained {result.params.n_parameters()} parameters for {config.epochs} epochs; "
          f"loss {result.history[0]:.6g} -> {result.history[-1]:.6g}")
    _record("train", args, inputs=[args.config], outputs=[args.out],
            seed=config.seed, final_loss=result.history[-1])
    return EXIT_OK


def cmd_rollout(args: argparse.Namespace) -> int:
    from noda.assimilation import rollout_from_truth
    from noda.checkpoint import load_model
    from noda.trajectory_io import read_trajectory, write_observations, write_trajectory

    params = load_model(args.model)
    truth = read_trajectory(args.traj)
    t_h = truth.frame_index(args.th)
    schedule = sample_schedule(t_h, truth.n_frames - 1, args.alpha, seed=args.seed)
    op = params.operator_for(truth.d, args.c)
    if op.p != params.config.p:
        raise ValueError(f"{op.kind} operator gives p={op.p} but the model expects p={params.config.p}")
    obs = observe(truth, op, schedule.observed_frames(), args.snr, seed=args.seed + 1)
    estimate = rollout_from_truth(params, truth, obs, schedule)
    write_trajectory(args.out, estimate)
    outputs = [args.out]
    if args.obs_out:
        write_observations(args.obs_out, obs, truth.equation, truth.h)
        outputs.append(args.obs_out)
    print(f"Wrote {estimate.n_frames} estimated frames to {args.out} "
          f"({len(schedule.assim_times)} assimilation frames after t_H={t_h})")
    _record("rollout", args, inputs=[args.model, args.traj], outputs=outputs, seed=args.seed)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from evaluation.metrics import relmse
    from evaluation.report import emit_csv
    from noda.schemas.experiment import MetricRow
    from noda.trajectory_io import read_observations, read_trajectory

    estimate = read_trajectory(args.est)
    truth = read_trajectory(args.gt)
    t_h = truth.frame_index(args.th)
    t_f = min(estimate.n_frames, truth.n_frames) - 1

    exclude: tuple[int, ...] = ()
    snr, alpha = float("nan"), float("nan")
    if args.obs:
        op = MeasurementOperator.from_name(args.c, truth.d, seed=args.measurement_seed, p=args.p)
        obs = read_observations(args.obs, op)
        snr = obs.snr_db
        assim = tuple(t for t in obs.times if t > t_h)
        alpha = len(assim) / (t_f - t_h) if t_f > t_h else 0.0
        if args.exclude_observed:
            exclude = assim
    elif args.exclude_observed:
        raise ValueError("--exclude-observed needs --obs")

    score = relmse(estimate, truth, t_h, t_f, exclude)
    row = MetricRow(method=args.method, equation=truth.equation.label, t_f=t_f * truth.h,
                    snr_db=snr, alpha=alpha, t_h=args.th, relmse_mean=score, relmse_std=0.0)
    emit_csv([row], args.csv)
    print(f"RelMSE = {score:.6g} over frames [{t_h}, {t_f}]")
    _record("eval", args, inputs=[args.est, args.gt], outputs=[args.csv], relmse=score)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    from evaluation.experiments import run_experiment
    from evaluation.report import format_report
    from noda.schemas.experiment import load_experiment_spec

    spec = load_experiment_spec(args.spec)
    results = run_experiment(spec, out_dir=args.out)
    print(format_report(results))
    outputs = [Path(args.out) / f"{stem}{name}.{ext}" for name in results
               for stem, ext in (("", "csv"), ("heatmap_", "noda"))] if args.out else []
    _record("experiment", args, inputs=[args.spec, spec.model], outputs=outputs, seeds=spec.seeds)
    return EXIT_OK


def gradcheck_suite(seed: int = 0, eps: float = 1e-6, n_coords: int = 200) -> dict[str, float]:
    """Finite-difference checks of the primitives, one FNO block and a 3-step NODA rollout loss."""
    from noda import autodiff as ad
    from noda.neural_operator import BoundParams, block_prefix, fno_block, init_params
    from noda.schemas.config import ModelConfig
    from noda.training import window_loss

    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}

    def check(name: str, f, params) -> None:
        results[name] = ad.finite_difference_check(f, params, eps=eps, n_coords=n_coords, seed=seed)

    # primitives on a (2, 16) real field
    x = rng.normal(size=(2, 16))
    c = rng.normal(size=(2, 16))
    w = rng.normal(size=(16, 5))
    c5 = rng.normal(size=(2, 5))
    check("add_multiply", lambda t: ad.reduce_sum((t["x"] + c - t["x"] * 0.5) * c), {"x": x})
    check("divide", lambda t: ad.reduce_sum(t["x"] / (2.0 + c * c)), {"x": x})
    check("matmul", lambda t: ad.reduce_sum((t["x"] @ t["w"]) * c5), {"x": x, "w": w})
    check("relu", lambda t: ad.reduce_sum(ad.relu(t["x"]) * c), {"x": x})
    check("tanh", lambda t: ad.reduce_sum(ad.tanh(t["x"]) * c), {"x": x})
    check("l2_norm", lambda t: ad.l2_norm(t["x"]), {"x": x})
    check("concat_reshape", lambda t: ad.reduce_sum(
        ad.reshape(ad.concat([t["x"], t["x"] * c], axis=-1), (4, 16)) * np.ones((4, 16))), {"x": x})

    c_hat = ad.rfft(ad.Tensor(c), (1,))
    check("rfft_irfft", lambda t: ad.reduce_sum(ad.irfft(ad.rfft(t["x"], (1,)) * c_hat, (1,), (16,)) * c),
          {"x": x})
    check("mode_truncate_pad", lambda t: ad.reduce_sum(ad.irfft(
        ad.mode_pad(ad.mode_truncate(ad.rfft(t["x"], (1,)), (1,), 4), (1,), 4, (2, 9)),
        (1,), (16,)) * c), {"x": x})

    v = rng.normal(size=(2, 16, 3))
    c2 = rng.normal(size=(2, 16, 2))

    def contract(t):
        spec = ad.mode_truncate(ad.rfft(t["v"], (1,)), (1,), 4)
        mixed = ad.spectral_contract(spec, t["re"], t["im"])
        return ad.reduce_sum(ad.irfft(ad.mode_pad(mixed, (1,), 4, (2, 9, 2)), (1,), (16,)) * c2)

    check("spectral_contract", contract,
          {"v": v, "re": rng.normal(size=(4, 3, 2)), "im": rng.normal(size=(4, 3, 2))})

    # one 2D FNO block
    block_cfg = ModelConfig(equation="ns", ndim=2, n=8, length=1.0, width=3, modes=2, hidden=4, p=64)
    prefix = block_prefix(0)
    block_arrays = {k: a for k, a in init_params(block_cfg, seed=seed).arrays.items() if k.startswith(prefix)}
    v2 = rng.normal(size=(2, 8, 8, 3))

    def block_loss(t):
        bound = BoundParams(block_cfg, dict(t), None)
        return ad.l2_norm(fno_block(v2, bound.block(0)))

    check("fno_block", block_loss, block_arrays)

    # 3-step recursive rollout with two corrected frames
    cfg = ModelConfig(equation="ks", ndim=1, n=16, length=2 * np.pi, width=4, modes=4, hidden=8, p=16)
    params = init_params(cfg, seed=seed)
    base = np.sin(2 * np.pi * np.arange(16) / 16)
    z0 = base + 0.1 * rng.normal(size=(2, 16))
    truth = base + 0.05 * rng.normal(size=(2, 3, 16))
    y = truth + 0.01 * rng.normal(size=truth.shape)

    def rollout_loss(t):
        bound = BoundParams(cfg, dict(t), params.c_hat)
        return window_loss(bound, z0, truth, y, n_observed=2, lam=0.5)[0]

    check("noda_rollout_3step", rollout_loss, params.arrays)
    return results


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = gradcheck_suite(seed=args.seed)
    worst = max(results.values())
    for name, err in results.items():
        status = "ok" if err < GRADCHECK_TOLERANCE else "FAIL"
        print(f"{name:<22} {err:.3e}  {status}")
    _record("gradcheck", args, seed=args.seed, max_rel_error=worst)
    if worst >= GRADCHECK_TOLERANCE:
        raise NumericalError(f"gradient check failed: max relative error {worst:.3e}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    from evaluation.bench import run_bench
    from noda.checkpoint import load_model
    from noda.trajectory_io import read_trajectory

    params = load_model(args.model)
    truth = read_trajectory(args.traj)
    result = run_bench(params, truth, iterations=args.iterations, warmup=args.warmup)
    print(f"predict          {1e3 * result.predict:.4f} ms/step")
    print(f"predict+correct  {1e3 * result.predict_correct:.4f} ms/step")
    print(f"ratio            {result.ratio:.2f}x")
    _record("bench", args, inputs=[args.model, args.traj],
            predict=result.predict, predict_correct=result.predict_correct)
    return EXIT_OK


# ============================================================
# PARSER
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noda", description="NODA neural-operator data assimilation lab")
    parser.add_argument("--version", action="version", version=f"noda {APP_VERSION}")
    parser.add_argument("--log-level", default=None, help="Override NODA_LOG_LEVEL")
    parser.add_argument("--log-format", choices=["text", "json"], default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Generate ground-truth trajectories")
    p.add_argument("--equation", required=True, choices=["ks", "kdv", "ns"])
    p.add_argument("--n-traj", type=int, required=True)
    p.add_argument("--tf", type=float, required=True, help="Final time in seconds")
    p.add_argument("--dt", type=float, default=None, help="Recorded timestep h (seconds)")
    p.add_argument("--resolution", type=_resolution, default=None)
    p.add_argument("--re", type=float, default=None, help="Reynolds number (ns only)")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--out", default=settings.DATA_DIR, help="Dataset directory (default: NODA_DATA_DIR)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="Train a model on a trajectory directory")
    p.add_argument("--data", default=settings.DATA_DIR, help="Dataset directory (default: NODA_DATA_DIR)")
    p.add_argument("--config", required=True, help="JSON or key=value TrainConfig file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="Estimate a trajectory from noisy observations")
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--snr", type=float, default=float("inf"), help="dB, or inf")
    p.add_argument("--th", type=float, default=0.0, help="Warm-up end in seconds")
    p.add_argument("--c", choices=["identity", "random"], default=None,
                   help="Must match the model's measurement operator (default: the model's)")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.add_argument("--obs-out", default=None, help="Also write the observation set here")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("eval", help="Score an estimate against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--th", type=float, default=0.0)
    p.add_argument("--csv", required=True)
    p.add_argument("--method", default="noda")
    p.add_argument("--obs", default=None, help="Observation file written by rollout --obs-out")
    p.add_argument("--c", choices=["identity", "random"], default="identity")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--measurement-seed", type=int, default=0)
    p.add_argument("--exclude-observed", action="store_true",
                   help="Score only frames after t_H that were never assimilated")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="Run the protocols of an experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gradcheck", help="Finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="Per-step timing of predict vs predict+correct")
    p.add_argument("--model", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    setup_logging(level=args.log_level, fmt=args.log_format)
    try:
        return args.func(args)
    except FormatError as exc:
        logger.error("Format error: %s", exc, extra={"error": str(exc), "error_type": "format"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc, extra={"error": str(exc), "error_type": "numerical"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FileNotFoundError, MissingObservationError) as exc:
        logger.error("Usage error: %s", exc, extra={"error": str(exc), "error_type": "usage"})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
