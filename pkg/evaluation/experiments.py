"""
Experiment Protocols — prediction, assimilation and warm-up sweeps.

All three start from ẑ_{t_0} = z_D(t_0) on each held-out trajectory:

  prediction    warm-up to t_H, then predict only (α = 0); score [t_H+1, t_f]
  assimilation  warm-up to t_H, then correct at round(α·horizon) random
                frames; score the same horizon [t_H+1, t_f] (observed
                frames included unless exclude_observed)
  warmup        α = 0 while t_H sweeps over t_h_sweep, at every SNR

Every (trajectory, seed) pair yields one RelMSE; rows report mean ± std
over all of them. Trajectories are scored on a thread pool and gathered
in index order, so results do not depend on the worker count.

Baseline rows (persistence, prediction_only) accompany each NODA row
when ExperimentSpec.baselines is set. Rollout rows carry their mean
wall time per step.
"""

from __future__ import annotations

import concurrent.futures
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from evaluation.metrics import aggregate, persistence_estimate, relmse
from evaluation.report import emit_csv, emit_heatmap_data, save_report
from noda.assimilation import rollout_from_truth
from noda.checkpoint import load_model
from noda.config import settings
from noda.dataset import (
    MeasurementOperator,
    ObservationSet,
    Schedule,
    Trajectory,
    observe,
    sample_schedule,
)
from noda.neural_operator import NodaParams
from noda.schemas.experiment import ExperimentSpec, MetricRow
from noda.trajectory_io import load_dataset

logger = logging.getLogger("noda.experiments")

METHOD_NODA = "noda"
METHOD_PERSISTENCE = "persistence"
METHOD_PREDICTION_ONLY = "prediction_only"


@dataclass(frozen=True)
class Case:
    """One scored configuration."""
    t_f: float
    snr_db: float
    alpha: float
    t_h: float


@dataclass
class ExperimentContext:
    spec: ExperimentSpec
    params: NodaParams
    trajectories: list[Trajectory]
    op: MeasurementOperator

    @classmethod
    def load(
        cls,
        spec: ExperimentSpec,
        params: NodaParams | None = None,
        trajectories: Sequence[Trajectory] | None = None,
    ) -> "ExperimentContext":
        params = params or load_model(spec.model)
        trajectories = list(trajectories) if trajectories is not None else load_dataset(spec.data)
        if spec.n_test is not None:
            trajectories = trajectories[: spec.n_test]
        if not trajectories:
            raise ValueError(f"no test trajectories in {spec.data}")
        op = params.operator_for(trajectories[0].d, spec.measurement, spec.measurement_seed)
        if op.p != params.config.p:
            raise ValueError(f"measurement dimension {op.p} does not match the model's p={params.config.p}")
        return cls(spec=spec, params=params, trajectories=trajectories, op=op)


@dataclass(frozen=True)
class _Draw:
    """Truncated truth, schedule and observations for one (trajectory, seed) pair."""
    truth: Trajectory
    schedule: Schedule
    observations: ObservationSet
    t_h_frame: int
    t_f_frame: int


def _draw(ctx: ExperimentContext, truth: Trajectory, case: Case, seed: int, index: int) -> _Draw:
    t_f_frame = truth.frame_index(case.t_f)
    t_h_frame = truth.frame_index(case.t_h)
    if t_f_frame >= truth.n_frames:
        raise ValueError(f"t_f={case.t_f} s exceeds trajectory length {truth.t_f} s")
    truth = truth.truncate(t_f_frame + 1)
    stream = seed * 100_003 + index
    schedule = sample_schedule(t_h_frame, t_f_frame, case.alpha, seed=stream)
    obs = observe(truth, ctx.op, schedule.observed_frames(), case.snr_db, seed=stream + 1)
    return _Draw(truth, schedule, obs, t_h_frame, t_f_frame)


def _timed_rollout(ctx: ExperimentContext, draw: _Draw, corrector: bool) -> tuple[Trajectory, float]:
    """Rollout plus its wall time per step in seconds."""
    start = time.perf_counter()
    estimate = rollout_from_truth(ctx.params, draw.truth, draw.observations if corrector else None,
                                  draw.schedule, corrector=corrector)
    return estimate, (time.perf_counter() - start) / max(draw.t_f_frame, 1)


def noda_estimate(ctx: ExperimentContext, case: Case, index: int = 0,
                  seed: int | None = None) -> tuple[Trajectory, Trajectory]:
    """(estimate, truncated truth) of the NODA rollout on one trajectory, as scored by score_case."""
    seed = ctx.spec.seeds[0] if seed is None else seed
    draw = _draw(ctx, ctx.trajectories[index], case, seed, index)
    return rollout_from_truth(ctx.params, draw.truth, draw.observations, draw.schedule), draw.truth


def _score_one(ctx: ExperimentContext, truth: Trajectory, case: Case, seed: int,
               index: int) -> dict[str, tuple[float, float | None]]:
    """method → (RelMSE, seconds per step or None)."""
    draw = _draw(ctx, truth, case, seed, index)
    truth = draw.truth
    exclude = draw.schedule.assim_times if ctx.spec.exclude_observed else ()
    start, end = draw.t_h_frame + 1, draw.t_f_frame

    estimate, seconds = _timed_rollout(ctx, draw, corrector=True)
    scores = {METHOD_NODA: (relmse(estimate, truth, start, end, exclude), seconds)}
    if ctx.spec.baselines:
        frozen = persistence_estimate(truth, draw.t_h_frame, end)
        scores[METHOD_PERSISTENCE] = (relmse(frozen, truth, start, end, exclude), None)
        estimate, seconds = _timed_rollout(ctx, draw, corrector=False)
        scores[METHOD_PREDICTION_ONLY] = (relmse(estimate, truth, start, end, exclude), seconds)
    return scores


def score_case(ctx: ExperimentContext, case: Case) -> list[MetricRow]:
    """Rows (NODA + baselines) for one case over every trajectory and seed.

    time_per_step is the mean rollout wall time per frame; persistence
    rows leave it empty.
    """
    started = time.monotonic()
    jobs = [(i, t, s) for s in ctx.spec.seeds for i, t in enumerate(ctx.trajectories)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=settings.WORKERS) as pool:
        results = list(pool.map(lambda job: _score_one(ctx, job[1], case, job[2], job[0]), jobs))

    rows = []
    for method in results[0]:
        mean, std = aggregate([r[method][0] for r in results])
        timings = [r[method][1] for r in results if r[method][1] is not None]
        rows.append(MetricRow(
            method=method, equation=ctx.spec.equation, t_f=case.t_f, snr_db=case.snr_db,
            alpha=case.alpha, t_h=case.t_h, relmse_mean=mean, relmse_std=std,
            time_per_step=float(np.mean(timings)) if timings else None,
        ))
    logger.info(
        "Scored t_f=%g snr=%g alpha=%g t_h=%g", case.t_f, case.snr_db, case.alpha, case.t_h,
        extra={"relmse": rows[0].relmse_mean, "alpha": case.alpha, "snr_db": case.snr_db,
               "t_h": case.t_h, "duration_ms": round(1000 * (time.monotonic() - started))},
    )
    return rows


def _run(ctx: ExperimentContext, cases: Sequence[Case]) -> list[MetricRow]:
    rows: list[MetricRow] = []
    for case in cases:
        rows.extend(score_case(ctx, case))
    return rows


def prediction_cases(spec: ExperimentSpec) -> list[Case]:
    return [Case(t_f, snr, 0.0, spec.t_h) for snr in spec.snr_db for t_f in spec.t_f]


def assimilation_cases(spec: ExperimentSpec) -> list[Case]:
    return [Case(t_f, snr, alpha, spec.t_h)
            for snr in spec.snr_db for t_f in spec.t_f for alpha in spec.alpha]


def warmup_cases(spec: ExperimentSpec) -> list[Case]:
    if not spec.t_h_sweep:
        raise ValueError("warmup protocol needs a non-empty t_h_sweep")
    return [Case(t_f, snr, 0.0, t_h)
            for snr in spec.snr_db for t_f in spec.t_f for t_h in spec.t_h_sweep]


def experiment_prediction(spec: ExperimentSpec, ctx: ExperimentContext | None = None) -> list[MetricRow]:
    cases = prediction_cases(spec)
    return _run(ctx or ExperimentContext.load(spec), cases)


def experiment_assimilation(spec: ExperimentSpec, ctx: ExperimentContext | None = None) -> list[MetricRow]:
    cases = assimilation_cases(spec)
    return _run(ctx or ExperimentContext.load(spec), cases)


def experiment_warmup(spec: ExperimentSpec, ctx: ExperimentContext | None = None) -> list[MetricRow]:
    cases = warmup_cases(spec)
    return _run(ctx or ExperimentContext.load(spec), cases)


PROTOCOLS: dict[str, Callable[[ExperimentSpec, ExperimentContext | None], list[MetricRow]]] = {
    "prediction": experiment_prediction,
    "assimilation": experiment_assimilation,
    "warmup": experiment_warmup,
}

CASES: dict[str, Callable[[ExperimentSpec], list[Case]]] = {
    "prediction": prediction_cases,
    "assimilation": assimilation_cases,
    "warmup": warmup_cases,
}


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    ctx: ExperimentContext | None = None,
) -> dict[str, list[MetricRow]]:
    """Run every protocol listed in spec.protocols.

    When out_dir (or spec.out) is set, writes one CSV per protocol, the
    report, and heatmap_<protocol>.noda: |ẑ − z_D| of the NODA estimate
    on the first trajectory and seed for the protocol's last case.
    """
    ctx = ctx or ExperimentContext.load(spec)
    results = {name: PROTOCOLS[name](spec, ctx) for name in spec.protocols}
    target = out_dir or spec.out
    if target:
        target = Path(target)
        for name, rows in results.items():
            emit_csv(rows, target / f"{name}.csv")
            estimate, truth = noda_estimate(ctx, CASES[name](spec)[-1])
            emit_heatmap_data(estimate, truth, target / f"heatmap_{name}.noda")
        save_report(results, target)
    return results
