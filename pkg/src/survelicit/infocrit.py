"""Maximum-likelihood fits and information criteria for censored data.

The BIC sample size defaults to the number of uncensored observations (the
recommended complexity penalty for censored time-to-event data); pass
``use_total_n=True`` to use the record count instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import families as fam
from .elicitation import transform_arrays
from .errors import FitError, ValidationError
from .families import Family
from .nonparametric import kaplan_meier

__all__ = ["MleFit", "mle_fit", "information_criteria"]


@dataclass
class MleFit:
    family: Family
    arm: int
    params: fam.ModelParams
    log_likelihood: float
    n_params: int
    n_events: int
    n_records: int
    aic: float
    bic: float
    converged: bool
    n_starts: int

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "arm": self.arm,
            "params": list(self.params.values),
            "log_likelihood": self.log_likelihood,
            "n_params": self.n_params,
            "n_events": self.n_events,
            "aic": self.aic,
            "bic": self.bic,
        }


def _neg_ll(family, t, d, events):
    def fn(x):
        theta = np.exp(x) if family is not Family.LOGNORMAL else np.array([x[0], math.exp(x[1])])
        with np.errstate(all="ignore"):
            ls = fam.logsf(family, theta, t)
            lh = fam.loghaz(family, theta, t)
            val = ls.sum() + lh[events].sum()
        return -val if math.isfinite(val) else 1e300

    return fn


def _encode(family, theta):
    if family is Family.LOGNORMAL:
        return np.array([theta[0], math.log(theta[1])])
    return np.log(np.asarray(theta, dtype=float))


def _decode(family, x):
    if family is Family.LOGNORMAL:
        return np.array([x[0], math.exp(x[1])])
    return np.exp(x)


def _starting_points(family, t, d, data, arm):
    """Moment-based, KM-quantile-based and perturbed starts."""
    rate = d.sum() / t.sum()
    starts = []
    if family is Family.EXPONENTIAL:
        starts.append([rate])
    elif family is Family.WEIBULL:
        starts.append([1.0, rate])
    elif family is Family.LOGNORMAL:
        logs = np.log(t[d == 1]) if d.any() else np.log(t)
        starts.append([float(np.mean(logs)), max(float(np.std(logs)), 0.2)])
    elif family is Family.LOGLOGISTIC:
        starts.append([1.5, 1.0 / rate])
    elif family is Family.GOMPERTZ:
        starts.append([0.05, rate])

    # KM-quantile start: read survival at two interior times off the KM curve
    try:
        km = kaplan_meier(data, arm)
        grid = np.quantile(t, [0.35, 0.75])
        s_vals = km.evaluate(grid)
        if 0 < s_vals[1] < s_vals[0] < 1 and grid[0] < grid[1]:
            theta, _ = transform_arrays(family, s_vals[0], s_vals[1], grid[0], grid[1])
            theta = np.atleast_1d(np.asarray(theta, dtype=float).squeeze())
            if np.all(np.isfinite(theta)):
                try:
                    fam.validate_param_array(family, theta)
                    starts.append(list(theta))
                except ValidationError:
                    pass
    except ValidationError:
        pass

    # deterministic perturbation of the moment start
    rng = np.random.default_rng(12345)
    base = np.asarray(starts[0], dtype=float)
    starts.append(list(base * np.exp(rng.normal(0.0, 0.4, size=base.shape))))
    return starts


def mle_fit(family, data, arm: int, use_total_n: bool = False) -> MleFit:
    """Maximise the censored log-likelihood by multi-start Nelder-Mead on
    log-transformed parameters; the exponential rate is solved in closed form.
    """
    family = fam.coerce_family(family)
    t, d = data.arm_subset(arm)
    events = d == 1
    n_events = int(events.sum())
    if n_events == 0:
        raise ValidationError(f"arm {arm} has no events; cannot fit by ML")

    if family is Family.EXPONENTIAL:
        rate = n_events / t.sum()
        params = fam.ModelParams(family, (rate,))
        ll = n_events * math.log(rate) - rate * t.sum()
        return _finish(family, arm, params, ll, n_events, t.size, use_total_n, True, 1)

    obj = _neg_ll(family, t, d, events)
    best = None
    starts = _starting_points(family, t, d, data, arm)
    for start in starts:
        res = optimize.minimize(
            obj,
            _encode(family, start),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not math.isfinite(best.fun) or best.fun >= 1e299:
        raise FitError(f"ML optimisation diverged for {family.value} arm {arm}")
    theta = _decode(family, best.x)
    params = fam.ModelParams(family, tuple(theta))
    return _finish(
        family, arm, params, -float(best.fun), n_events, t.size, use_total_n,
        bool(best.success), len(starts),
    )


def _finish(family, arm, params, ll, n_events, n_records, use_total_n, converged, n_starts):
    p = fam.n_params(family)
    n_for_bic = n_records if use_total_n else n_events
    aic = -2.0 * ll + 2.0 * p
    bic = -2.0 * ll + p * math.log(n_for_bic)
    return MleFit(family, arm, params, ll, p, n_events, n_records, aic, bic, converged, n_starts)


def information_criteria(fit: MleFit) -> dict[str, float]:
    """AIC/BIC recomputed from the fit (exact arithmetic, no refitting)."""
    if fit.n_events < 1:
        raise ValidationError("information criteria need at least one event")
    return {"aic": fit.aic, "bic": fit.bic}
