"""Kaplan-Meier product-limit estimator and binned empirical hazards."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["StepFunction", "HazardSeries", "kaplan_meier", "empirical_hazard"]


@dataclass
class StepFunction:
    """Right-continuous survival step function: S drops at event times only."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def evaluate(self, t) -> np.ndarray:
        """S(t) with S = 1 before the first event time."""
        t = np.asarray(t, dtype=float)
        if self.times.size == 0:
            return np.ones_like(t)
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.where(idx >= 0, self.survival[np.maximum(idx, 0)], 1.0)


def kaplan_meier(data, arm: int) -> StepFunction:
    """Product-limit estimate over the arm's distinct event times.

    Censored records at a tied time are treated as leaving risk after the
    events at that time (the standard convention).
    """
    t, d = data.arm_subset(arm)
    order = np.argsort(t, kind="stable")
    t, d = t[order], d[order]
    event_times = []
    survival = []
    at_risk = []
    events = []
    s = 1.0
    n_at_risk = t.size
    for ut in np.unique(t):
        mask = t == ut
        n_events = int(d[mask].sum())
        if n_events > 0:
            s *= 1.0 - n_events / n_at_risk
            event_times.append(float(ut))
            survival.append(s)
            at_risk.append(n_at_risk)
            events.append(n_events)
        n_at_risk -= int(mask.sum())
    return StepFunction(
        times=np.asarray(event_times),
        survival=np.asarray(survival),
        at_risk=np.asarray(at_risk, dtype=int),
        events=np.asarray(events, dtype=int),
    )


@dataclass
class HazardSeries:
    """Per-bin event rates with log-scale normal confidence intervals."""

    edges: np.ndarray
    hazard: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    events: np.ndarray
    person_time: np.ndarray
    ci_defined: np.ndarray


def empirical_hazard(data, arm: int, bin_width: float = 0.5) -> HazardSeries:
    """Events per person-year within each bin of the follow-up axis.

    The 95% CI is estimate * exp(+-1.96/sqrt(events)); zero-event bins get
    hazard 0 with the CI marked undefined.
    """
    if bin_width <= 0:
        raise ValidationError("bin_width must be > 0")
    t, d = data.arm_subset(arm)
    n_bins = int(np.ceil(t.max() / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    events = np.zeros(n_bins, dtype=int)
    person_time = np.zeros(n_bins)
    for lo_idx in range(n_bins):
        lo, hi = edges[lo_idx], edges[lo_idx + 1]
        overlap = np.clip(t, lo, hi) - lo
        person_time[lo_idx] = overlap.sum()
        in_bin = (t > lo) & (t <= hi) & (d == 1)
        events[lo_idx] = int(in_bin.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        hazard = np.where(person_time > 0, events / np.where(person_time > 0, person_time, 1.0), 0.0)
        width = np.exp(1.96 / np.sqrt(np.where(events > 0, events, 1)))
    defined = events > 0
    ci_lower = np.where(defined, hazard / width, np.nan)
    ci_upper = np.where(defined, hazard * width, np.nan)
    return HazardSeries(edges, hazard, ci_lower, ci_upper, events, person_time, defined)
