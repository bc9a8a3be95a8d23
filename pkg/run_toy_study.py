#!/usr/bin/env python3
"""
run_toy_study.py — Train a small KS model end to end and check the expected trends.

Checks on the held-out trajectories:
  1. prediction (α = 0) beats persistence by at least 30%
  2. RelMSE is non-increasing over α ∈ {0, 0.1, 0.2, 0.3}, down at least 25% overall
  3. 20 dB observations score no better than 30 dB ones
  4. a 40-frame warm-up scores better than a 1-frame warm-up
  5. predict+correct costs 1-3x the wall time of predict alone

Usage:
    python run_toy_study.py                       # Full run (~50 epochs)
    python run_toy_study.py --epochs 5 --n-train 10 --n-test 4   # Quick look
    python run_toy_study.py --out toy_results/    # Keep data, model and report
    python run_toy_study.py --json                # Check results as JSON (for CI)
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from evaluation.bench import OVERHEAD_BOUNDS, BenchResult, run_bench
from evaluation.experiments import METHOD_NODA, METHOD_PERSISTENCE, ExperimentContext, run_experiment
from noda.checkpoint import save_checkpoint
from noda.logging import setup_logging
from noda.schemas.config import TrainConfig
from noda.schemas.experiment import ExperimentSpec
from noda.solvers.factory import default_config, generate_trajectories
from noda.trajectory_io import save_dataset
from noda.training import train

T_F = 30.0
T_H = 10.0
ALPHAS = [0.0, 0.1, 0.2, 0.3]


def _noda(rows, **match) -> float:
    for r in rows:
        if r.method == METHOD_NODA and all(getattr(r, k) == v for k, v in match.items()):
            return r.relmse_mean
    raise KeyError(f"no NODA row for {match}")


def run_checks(results: dict, bench: BenchResult) -> list[dict]:
    """Evaluate the five checks; each entry has name, passed and the numbers behind it."""
    prediction = results["prediction"]
    noda = _noda(prediction, snr_db=30.0)
    persistence = next(r.relmse_mean for r in prediction
                       if r.method == METHOD_PERSISTENCE and r.snr_db == 30.0)

    sweep = [_noda(results["assimilation"], alpha=a, snr_db=30.0) for a in ALPHAS]
    noisy = [_noda(results["assimilation"], alpha=0.3, snr_db=s) for s in (20.0, 30.0)]
    warm = [_noda(results["warmup"], t_h=t_h, snr_db=30.0) for t_h in (0.25, T_H)]

    return [
        {"name": "prediction beats persistence by 30%", "passed": noda <= 0.7 * persistence,
         "noda": noda, "persistence": persistence},
        {"name": "alpha sweep non-increasing, -25% overall",
         "passed": all(b <= a for a, b in zip(sweep, sweep[1:])) and sweep[-1] <= 0.75 * sweep[0],
         "relmse": dict(zip(map(str, ALPHAS), sweep))},
        {"name": "20 dB no better than 30 dB", "passed": noisy[0] >= noisy[1],
         "relmse_20db": noisy[0], "relmse_30db": noisy[1]},
        {"name": "40-frame warm-up beats 1-frame warm-up", "passed": warm[1] < warm[0],
         "relmse_t_h_1": warm[0], "relmse_t_h_40": warm[1]},
        {"name": f"correction overhead within {OVERHEAD_BOUNDS[0]:g}-{OVERHEAD_BOUNDS[1]:g}x",
         "passed": bench.overhead_within(), "ratio": bench.ratio,
         "predict_s": bench.predict, "predict_correct_s": bench.predict_correct},
    ]


def main():
    parser = argparse.ArgumentParser(description="NODA Toy Study (KS)")
    parser.add_argument("--n-train", type=int, default=50, help="Training trajectories (default: 50)")
    parser.add_argument("--n-test", type=int, default=10, help="Held-out trajectories (default: 10)")
    parser.add_argument("--epochs", type=int, default=50, help="Training epochs (default: 50)")
    parser.add_argument("--resolution", type=int, default=128, help="Grid points (default: 128)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="Keep data, model and reports here")
    parser.add_argument("--json", action="store_true", help="Output JSON only (for CI/automation)")
    args = parser.parse_args()

    setup_logging(level="WARNING" if args.json else "INFO")
    started = time.monotonic()
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="noda_toy_"))

    # Step 1: Generate
    solver = default_config("ks", resolution=args.resolution)
    trajectories = generate_trajectories("ks", solver, args.n_train + args.n_test, T_F, base_seed=args.seed)
    train_set, test_set = trajectories[: args.n_train], trajectories[args.n_train:]
    save_dataset(out / "data", trajectories, metadata={"t_f": T_F, "h": solver.h})
    if not args.json:
        print(f"Generated {len(trajectories)} KS trajectories ({trajectories[0].n_frames} frames each)")

    # Step 2: Train
    warmup_frames = test_set[0].frame_index(T_H)
    config = TrainConfig(epochs=args.epochs, lr=1e-3, width=32, modes=12, hidden=64,
                         t_h_train=warmup_frames, batch_size=10, seed=args.seed)
    result = train(train_set, config)
    save_checkpoint(out / "model.nodm", result.params, result.adam)
    if not args.json:
        print(f"Trained {args.epochs} epochs: loss {result.history[0]:.4g} -> {result.history[-1]:.4g}")

    # Step 3: Evaluate
    spec = ExperimentSpec(
        equation="ks", model=str(out / "model.nodm"), data=str(out / "data"),
        t_f=[T_F], snr_db=[30.0, 20.0], alpha=ALPHAS, t_h=T_H, t_h_sweep=[0.25, T_H],
        seeds=[args.seed],
    )
    ctx = ExperimentContext.load(spec, params=result.params, trajectories=test_set)
    results = run_experiment(spec, out_dir=out, ctx=ctx)
    bench = run_bench(result.params, test_set[0])

    # Step 4: Output
    checks = run_checks(results, bench)
    elapsed = time.monotonic() - started
    if args.json:
        print(json.dumps({"checks": checks, "elapsed_s": round(elapsed, 1), "out": str(out)},
                         indent=2, default=float))
    else:
        print((out / "report.txt").read_text())
        for check in checks:
            print(f"{'PASS' if check['passed'] else 'FAIL'}  {check['name']}")
        print(f"\nElapsed {elapsed / 60:.1f} min; outputs in {out}")

    # Step 5: Exit code for CI
    if not all(check["passed"] for check in checks):
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
