"""Censored log-likelihood, Monte Carlo model evidence and Bayes factors.

Evidence values in the case study are of order 1e-250, so every reduction
here is carried out in natural-log space with log-sum-exp; linear-scale
values exist only as formatted mantissa/exponent views.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import families as fam
from .errors import ValidationError, ZeroEvidenceError
from .families import Family

__all__ = [
    "SurvivalDataset",
    "EvidenceResult",
    "BayesFactor",
    "log_likelihood",
    "log_likelihood_draws",
    "compute_bme",
    "bayes_factor",
    "grade_log10_bf",
    "default_checkpoints",
    "split_mantissa_exponent",
]

THREADS_ENV = "SURVELICIT_THREADS"


def _thread_count(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


@dataclass
class SurvivalDataset:
    """Censored time-to-event records: times in years, event flag, arm 1|2."""

    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.event = np.asarray(self.event, dtype=np.int8)
        self.arm = np.asarray(self.arm, dtype=np.int8)
        if not (self.time.shape == self.event.shape == self.arm.shape):
            raise ValidationError("time, event and arm must have equal length")
        if self.time.size == 0:
            raise ValidationError("dataset is empty")
        if np.any(self.time <= 0) or not np.all(np.isfinite(self.time)):
            raise ValidationError("all times must be finite and > 0")
        if not np.all(np.isin(self.event, (0, 1))):
            raise ValidationError("event flags must be 0 or 1")
        if not np.all(np.isin(self.arm, (1, 2))):
            raise ValidationError("arm codes must be 1 or 2")

    @property
    def n(self) -> int:
        return self.time.size

    def arms_present(self) -> list[int]:
        return sorted(int(a) for a in np.unique(self.arm))

    def arm_counts(self) -> dict[int, tuple[int, int]]:
        """arm -> (n records, n events)."""
        out = {}
        for a in self.arms_present():
            mask = self.arm == a
            out[a] = (int(mask.sum()), int(self.event[mask].sum()))
        return out

    def arm_subset(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.arm == arm
        if not mask.any():
            raise ValidationError(f"no records in arm {arm}")
        return self.time[mask], self.event[mask]


def log_likelihood(params, data: SurvivalDataset, arm: int) -> float:
    """Censored log-likelihood: sum of d_i*log h(t_i) + log S(t_i).

    Returns -inf when any event-time density underflows to impossible.
    """
    if not isinstance(params, fam.ModelParams):
        raise ValidationError("params must be a ModelParams instance")
    t, d = data.arm_subset(arm)
    theta = params.as_array()
    with np.errstate(all="ignore"):
        ls = fam.logsf(params.family, theta, t)
        lh = fam.loghaz(params.family, theta, t)
    total = float(np.sum(np.where(d == 1, lh, 0.0)) + np.sum(ls))
    return total if not math.isnan(total) else -math.inf


def log_likelihood_draws(
    family: Family,
    theta: np.ndarray,
    t: np.ndarray,
    d: np.ndarray,
    chunk_size: int = 8192,
    threads: int | None = None,
) -> np.ndarray:
    """Log-likelihood of each parameter draw against one arm's records.

    theta is (N, p); the (chunk x records) matrices are kept small and the
    per-chunk results concatenated in chunk order, so the output is identical
    regardless of thread count.
    """
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    d = np.asarray(d)
    n = theta.shape[0]
    events = d == 1
    starts = range(0, n, chunk_size)

    def one_chunk(start):
        block = theta[start : start + chunk_size, None, :]
        with np.errstate(all="ignore"):
            ls = fam.logsf(family, block, t[None, :])
            lh = fam.loghaz(family, block, t[None, :])
            out = ls.sum(axis=1) + np.where(events[None, :], lh, 0.0).sum(axis=1)
        return np.where(np.isnan(out), -np.inf, out)

    workers = _thread_count(threads)
    if workers == 1:
        parts = [one_chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_chunk, starts))
    return np.concatenate(parts) if parts else np.empty(0)


def default_checkpoints(n: int, start: int = 1000) -> list[int]:
    """Powers of 10 from `start` up to n, always ending at n."""
    points = []
    k = start
    while k < n:
        points.append(k)
        k *= 10
    points.append(n)
    return points


@dataclass
class EvidenceResult:
    """Log model evidence for one (family, arm) with its convergence trace."""

    family: Family
    arm: int
    log_bme: float
    mc_standard_error: float
    n_draws: int
    trace: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "arm": self.arm,
            "log_bme": self.log_bme,
            "mc_standard_error": self.mc_standard_error,
            "n_draws": self.n_draws,
            "trace": [[int(n), float(v)] for n, v in self.trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceResult":
        return cls(
            family=fam.coerce_family(d["family"]),
            arm=int(d["arm"]),
            log_bme=float(d["log_bme"]),
            mc_standard_error=float(d["mc_standard_error"]),
            n_draws=int(d["n_draws"]),
            trace=[(int(n), float(v)) for n, v in d.get("trace", [])],
        )


def log_mean_exp_trace(ll: np.ndarray, checkpoints: list[int]) -> list[tuple[int, float]]:
    """Cumulative log(mean(exp(l_1..l_k))) at each checkpoint.

    Segment-wise log-sum-exp with a fixed running reduction, so the value at
    a checkpoint depends only on the draws before it.  Shifting all entries
    of ``ll`` by a constant shifts every traced value by that constant.
    """
    trace = []
    running = -np.inf
    prev = 0
    for c in checkpoints:
        seg = ll[prev:c]
        if seg.size:
            running = np.logaddexp(running, logsumexp(seg))
        prev = c
        trace.append((int(c), float(running - math.log(c))))
    return trace


def compute_bme(
    family,
    prior,
    data: SurvivalDataset,
    arm: int,
    checkpoints: list[int] | None = None,
    threads: int | None = None,
) -> EvidenceResult:
    """Monte Carlo model evidence: log(mean over prior draws of likelihood).

    The estimator is logSumExp(l_i) - log N over the prior draws'
    log-likelihoods; the trace records the cumulative estimate at each
    checkpoint (the last checkpoint is always N, and the traced value there
    is the reported log_bme).  The MC standard error is the delta-method
    error of the log estimate.
    """
    family = fam.coerce_family(family)
    if prior.family is not family:
        raise ValidationError(
            f"prior draws are for {prior.family.value}, not {family.value}"
        )
    n = prior.n
    if n < 1000:
        raise ValidationError("need at least 1000 prior draws for evidence")
    t, d = data.arm_subset(arm)
    ll = log_likelihood_draws(family, prior.arm_params(arm), t, d, threads=threads)
    if np.all(np.isneginf(ll)):
        raise ZeroEvidenceError(
            f"all {n} prior draws have zero likelihood for {family.value} arm {arm}"
        )
    if checkpoints is None:
        checkpoints = default_checkpoints(n)
    checkpoints = sorted({min(int(c), n) for c in checkpoints} | {n})
    trace = log_mean_exp_trace(ll, checkpoints)
    log_bme = trace[-1][1]

    # delta-method SE of the log estimate from the weight variance
    s1 = logsumexp(ll)
    s2 = logsumexp(2.0 * ll)
    ratio = math.exp(s2 - 2.0 * s1)  # sum w^2 / (sum w)^2
    var_term = max(ratio - 1.0 / n, 0.0)
    mc_se = math.sqrt(var_term * n / (n - 1))

    return EvidenceResult(family, arm, log_bme, mc_se, n, trace)


# verbal grading thresholds on |log10 BF|
GRADE_THRESHOLDS = (0.5, 1.0, 1.5, 2.0)
GRADE_LABELS = ("negligible", "substantial", "strong", "very strong", "decisive")


def grade_log10_bf(log10_bf: float) -> str:
    mag = abs(log10_bf)
    for cut, label in zip(GRADE_THRESHOLDS, GRADE_LABELS):
        if mag < cut:
            return label
    return GRADE_LABELS[-1]


@dataclass(frozen=True)
class BayesFactor:
    family_i: Family
    family_j: Family
    log10_bf: float
    grade: str


def bayes_factor(e_i: EvidenceResult, e_j: EvidenceResult) -> BayesFactor:
    """Relative support for model i over model j on the same arm/dataset."""
    if e_i.arm != e_j.arm:
        raise ValidationError("bayes factors compare evidences from the same arm")
    log10_bf = (e_i.log_bme - e_j.log_bme) / math.log(10.0)
    return BayesFactor(e_i.family, e_j.family, log10_bf, grade_log10_bf(log10_bf))


def split_mantissa_exponent(log_value: float) -> tuple[float, int]:
    """Render a natural-log value as (mantissa, base-10 exponent).

    Used to print evidences like 6.29e-246 that underflow a double.
    """
    if math.isinf(log_value):
        return (0.0, 0)
    log10v = log_value / math.log(10.0)
    exponent = math.floor(log10v)
    return (10.0 ** (log10v - exponent), int(exponent))
