"""
Bench — per-step wall time of prediction with and without correction.

Each timing is the median over `iterations` calls after `warmup`
untimed calls, so one slow call does not move the result.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from noda.assimilation import assimilate_step
from noda.config import settings
from noda.dataset import Trajectory
from noda.neural_operator import NodaParams

logger = logging.getLogger("noda.bench")

# Expected cost of predict+correct relative to predict alone.
OVERHEAD_BOUNDS = (1.0, 3.0)


def time_per_step(
    params: NodaParams,
    trajectory: Trajectory,
    corrector: bool = True,
    iterations: int | None = None,
    warmup: int | None = None,
) -> float:
    """Median seconds for one predict (+ correct) invocation on the trajectory's frames."""
    iterations = iterations or settings.BENCH_ITERATIONS
    warmup = settings.BENCH_WARMUP if warmup is None else warmup
    bound = params.bind()
    op = params.operator_for(trajectory.d)
    frames = trajectory.frames
    ys = op.apply(frames) if corrector else None
    n = trajectory.n_frames

    def call(i: int) -> None:
        k = i % n
        assimilate_step(bound, frames[k], None if ys is None else ys[k], corrector=corrector)

    for i in range(warmup):
        call(i)
    samples = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter()
        call(i)
        samples[i] = time.perf_counter() - start
    return float(np.median(samples))


@dataclass
class BenchResult:
    predict: float
    predict_correct: float

    @property
    def ratio(self) -> float:
        return self.predict_correct / self.predict if self.predict > 0 else float("inf")

    def overhead_within(self, low: float = OVERHEAD_BOUNDS[0], high: float = OVERHEAD_BOUNDS[1]) -> bool:
        return low <= self.ratio <= high


def run_bench(
    params: NodaParams,
    trajectory: Trajectory,
    iterations: int | None = None,
    warmup: int | None = None,
) -> BenchResult:
    predict = time_per_step(params, trajectory, corrector=False, iterations=iterations, warmup=warmup)
    full = time_per_step(params, trajectory, corrector=True, iterations=iterations, warmup=warmup)
    result = BenchResult(predict=predict, predict_correct=full)
    logger.info("Bench: predict %.3g s, predict+correct %.3g s (x%.2f)", predict, full, result.ratio,
                extra={"duration_ms": round(1000 * full, 3)})
    return result
