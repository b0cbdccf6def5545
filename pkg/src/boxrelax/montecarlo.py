"""Seeded Monte Carlo trials, aggregation, theory comparison and joint-error statistics."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .ao_sim import ao_solve, sample_ao
from .boxsolve import detect, solve_box_ls
from .errors import AggregateFailure, ConvergenceError, InvalidArgument
from .model import ProblemShape, Purpose, RngStream, sample_instance

log = logging.getLogger(__name__)

THREADS_ENV = "BOXRELAX_THREADS"
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class ExperimentConfig:
    shape: ProblemShape
    trials: int
    master_seed: int = 0
    path: str = "po"
    solver_tol: float = 1e-8
    force_all_ones_signal: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgument(f"trials must be >= 1, got {self.trials}")
        if not self.solver_tol > 0:
            raise InvalidArgument("solver_tol must be positive")
        if self.path not in ("po", "ao"):
            raise InvalidArgument(f"path must be 'po' or 'ao', got {self.path!r}")


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    total_bits: int
    ber_mean: float
    ber_stderr: float
    ci95: tuple
    per_trial_ber: list
    clamp_or_nonconverged: int
    n: int = 0
    delta: float = math.nan
    snr_db: float = math.nan
    tau_hat: list = field(default_factory=list)


@dataclass(frozen=True)
class JointErrorStats:
    k: int
    subsets_sampled: int
    joint_error_freq: float
    independence_prediction: float
    stderr: float
    ber_mean: float


@dataclass(frozen=True)
class ComparisonRow:
    snr_db: float | None = None
    delta: float | None = None
    n: int | None = None
    trials: int | None = None
    ber_mean: float | None = None
    ber_ci_lo: float | None = None
    ber_ci_hi: float | None = None
    pe_theory: float | None = None
    pe_high_snr: float | None = None
    pe_mfb: float | None = None
    tau_star: float | None = None
    z_score: float | None = None


@dataclass(frozen=True, eq=False)
class _Outcome:
    index: int
    ber: float
    mask: np.ndarray | None
    ok: bool
    tau_hat: float = math.nan


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_one(config: ExperimentConfig, t: int) -> _Outcome:
    stream = RngStream(config.master_seed, t)
    if config.path == "ao":
        sol = ao_solve(sample_ao(config.shape, stream))
        mask = sol.w_tilde <= -1.0
        return _Outcome(t, sol.ao_ber, mask, not sol.clamped, sol.tau_hat)
    inst = sample_instance(config.shape, stream, all_ones=config.force_all_ones_signal)
    try:
        sol = solve_box_ls(inst.A, inst.y, tol=config.solver_tol)
    except ConvergenceError as exc:
        log.warning("trial %d did not converge: %s", t, exc)
        return _Outcome(t, math.nan, None, False)
    det = detect(sol.x_hat, inst.x0)
    return _Outcome(t, det.ber, det.error_mask, True)


def _execute(config: ExperimentConfig, workers: int | None) -> list[_Outcome]:
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        outcomes = [_run_one(config, t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda t: _run_one(config, t), range(config.trials)))
    return sorted(outcomes, key=lambda o: o.index)


def _mean_stderr(values):
    k = len(values)
    mean = math.fsum(values) / k
    if k < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (k - 1)
    return mean, math.sqrt(var / k)


def _summarize(config: ExperimentConfig, outcomes: list[_Outcome]) -> TrialSummary:
    good = [o for o in outcomes if o.ok]
    failed = len(outcomes) - len(good)
    if failed > MAX_FAILURE_FRACTION * len(outcomes) or not good:
        raise AggregateFailure(
            f"{failed} of {len(outcomes)} trials failed (limit {MAX_FAILURE_FRACTION:.0%})"
        )
    if failed:
        log.warning("excluded %d non-converged or clamped trials", failed)
    bers = [o.ber for o in good]
    mean, se = _mean_stderr(bers)
    shape = config.shape
    return TrialSummary(
        trials=len(good),
        total_bits=len(good) * shape.n,
        ber_mean=mean,
        ber_stderr=se,
        ci95=(mean - 1.96 * se, mean + 1.96 * se),
        per_trial_ber=bers,
        clamp_or_nonconverged=failed,
        n=shape.n,
        delta=shape.delta,
        snr_db=shape.snr_db,
        tau_hat=[o.tau_hat for o in good],
    )


def run_trials(config: ExperimentConfig, workers: int | None = None) -> TrialSummary:
    """Run ``config.trials`` independent trials and aggregate their BER.

    Trial t draws everything from RngStream(master_seed, t, .), and results
    are reduced in trial order, so the summary does not depend on
    ``workers``.
    """
    return _summarize(config, _execute(config, workers))


def _sample_subsets(rng: np.random.Generator, n: int, k: int, count: int) -> np.ndarray:
    """``count`` uniform k-subsets of range(n), one per row."""
    out = rng.integers(0, n, size=(count, k))
    while True:
        srt = np.sort(out, axis=1)
        bad = np.any(srt[:, 1:] == srt[:, :-1], axis=1) if k > 1 else np.zeros(count, bool)
        if not bad.any():
            return out
        out[bad] = rng.integers(0, n, size=(int(bad.sum()), k))


def joint_error_stats(
    config: ExperimentConfig,
    k: int,
    subsets: int,
    masks=None,
    workers: int | None = None,
) -> JointErrorStats:
    """Frequency with which all k bits of a random k-subset are in error.

    ``masks`` (trials x n booleans) bypasses simulation, e.g. for synthetic
    inputs. The standard error treats trials as the iid unit.
    """
    n = config.shape.n
    if k < 1 or k > n:
        raise InvalidArgument(f"k must be in [1, n={n}], got {k}")
    if subsets < 1:
        raise InvalidArgument("subsets must be >= 1")
    if masks is None:
        outcomes = _execute(config, workers)
        _summarize(config, outcomes)
        masks = [(o.index, o.mask) for o in outcomes if o.ok]
    else:
        masks = list(enumerate(np.asarray(masks, dtype=bool)))

    per_trial, bers = [], []
    for t, mask in masks:
        rng = RngStream(config.master_seed, t, Purpose.SUBSET).generator()
        idx = _sample_subsets(rng, n, k, subsets)
        per_trial.append(float(np.count_nonzero(mask[idx].all(axis=1))) / subsets)
        bers.append(float(np.count_nonzero(mask)) / n)
    freq, se = _mean_stderr(per_trial)
    ber_mean = math.fsum(bers) / len(bers)

    shape = config.shape
    if shape.sigma_sq == 0:
        marginal = 0.0
    else:
        marginal = theory.predict_pe(shape.delta, shape.snr).pe
    return JointErrorStats(
        k=k,
        subsets_sampled=subsets * len(per_trial),
        joint_error_freq=freq,
        independence_prediction=marginal**k,
        stderr=se,
        ber_mean=ber_mean,
    )


def compare_to_theory(summary: TrialSummary, point: theory.TheoryPoint) -> ComparisonRow:
    if not math.isclose(summary.delta, point.delta, rel_tol=1e-12) or not math.isclose(
        summary.snr_db, point.snr_db, rel_tol=1e-9, abs_tol=1e-9
    ):
        raise InvalidArgument(
            f"summary (delta={summary.delta}, snr_db={summary.snr_db}) does not match "
            f"theory point (delta={point.delta}, snr_db={point.snr_db})"
        )
    diff = summary.ber_mean - point.pe
    if summary.ber_stderr > 0:
        z = diff / summary.ber_stderr
    else:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    lo, hi = summary.ci95
    return ComparisonRow(
        snr_db=summary.snr_db,
        delta=summary.delta,
        n=summary.n,
        trials=summary.trials,
        ber_mean=summary.ber_mean,
        ber_ci_lo=lo,
        ber_ci_hi=hi,
        pe_theory=point.pe,
        pe_high_snr=point.pe_high_snr,
        pe_mfb=point.pe_mfb,
        tau_star=point.tau_star,
        z_score=z,
    )


def theory_row(point: theory.TheoryPoint, snr_db: float | None = None) -> ComparisonRow:
    return ComparisonRow(
        snr_db=point.snr_db if snr_db is None else snr_db,
        delta=point.delta,
        pe_theory=point.pe,
        pe_high_snr=point.pe_high_snr,
        pe_mfb=point.pe_mfb,
        tau_star=point.tau_star,
    )
