"""Seeded replicate loop shared by every Monte Carlo experiment."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EmptyEstimate, SMPError, TooManyFailures

MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean with its standard error.

    ``std_err`` is the sample standard deviation over successful replicates
    divided by the square root of their number. ``bound`` carries the
    theoretical value the estimate is compared against, when there is one.
    """

    mean: float
    std_err: float
    replicates: int
    bound: Optional[float] = None
    failures: int = 0

    @classmethod
    def from_values(cls, values, bound=None, failures=0) -> "RiskEstimate":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise EmptyEstimate("no successful replicates")
        if not np.all(np.isfinite(v)):
            # infinite risk in some replicate (e.g. MLE missing a symbol)
            return cls(float(v.mean()), math.nan, int(v.size), bound, failures)
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size), bound, failures)

    def within(self, target: float, n_se: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_err + atol

    def below(self, target: float, n_se: float = 3.0) -> bool:
        return self.mean - n_se * self.std_err <= target


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``, mixed from ``seed`` by SeedSequence."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SMP_THREADS", "1")))
    except ValueError:
        return 1


def run_replicates(
    fn: Callable[[np.random.Generator], float],
    replicates: int,
    seed: int,
    n_jobs: Optional[int] = None,
    max_failure_rate: float = MAX_FAILURE_RATE,
):
    """Evaluate ``fn(rng)`` once per replicate.

    Returns ``(values, failures)`` where ``values`` holds the successful
    results in replicate order. A replicate fails when ``fn`` raises one of
    the package's own errors (singular design, solver failure, ...). The run
    is aborted with :class:`TooManyFailures` when more than
    ``max_failure_rate`` of the replicates fail.

    Results do not depend on ``n_jobs``: each replicate owns its random
    stream and the reduction order is fixed.
    """
    if replicates <= 0:
        raise EmptyEstimate("replicates must be positive")
    n_jobs = default_threads() if n_jobs is None else max(1, int(n_jobs))

    def one(i):
        try:
            return float(fn(replicate_rng(seed, i)))
        except SMPError:
            return math.nan

    if n_jobs == 1:
        out = np.fromiter((one(i) for i in range(replicates)), dtype=float, count=replicates)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = np.fromiter(pool.map(one, range(replicates), chunksize=64), dtype=float,
                              count=replicates)
    ok = ~np.isnan(out)
    failures = int(replicates - ok.sum())
    if failures > max_failure_rate * replicates:
        raise TooManyFailures(f"{failures} of {replicates} replicates failed")
    return out[ok], failures
