"""Closed-form density, survival, hazard and moment functions for the five
parametric time-to-event families.

Two call layers:

* an array layer (``logpdf``, ``logsf``, ``loghaz``, ``mean``, ``median``)
  that takes a family tag plus a parameter array of shape ``(..., p)`` and
  broadcasts against ``t`` — this is what the samplers and evidence code use;
* a checked scalar layer (``survival``, ``log_density``, ``hazard``,
  ``mean_survival``, ``median_survival``, ``gompertz_mode``) built on
  :class:`ModelParams`.

All internal likelihood arithmetic is done in log space; linear-scale values
are derived views.  Times are in years throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr

from .errors import ValidationError

__all__ = [
    "Family",
    "ModelParams",
    "PARAM_NAMES",
    "n_params",
    "coerce_family",
    "logpdf",
    "logsf",
    "sf",
    "pdf",
    "loghaz",
    "mean",
    "median",
    "survival",
    "log_density",
    "hazard",
    "mean_survival",
    "median_survival",
    "gompertz_mode",
    "exp1",
    "exp_scaled_e1",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
EULER_GAMMA = 0.5772156649015328606


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    WEIBULL = "weibull"
    LOGNORMAL = "lognormal"
    LOGLOGISTIC = "loglogistic"
    GOMPERTZ = "gompertz"

    def __str__(self) -> str:  # so click/CSV output shows the bare name
        return self.value


PARAM_NAMES: dict[Family, tuple[str, ...]] = {
    Family.EXPONENTIAL: ("rate",),
    Family.WEIBULL: ("shape", "scale"),
    Family.LOGNORMAL: ("mu", "sigma"),
    Family.LOGLOGISTIC: ("shape", "scale"),
    Family.GOMPERTZ: ("shape", "scale"),
}


def n_params(family: Family) -> int:
    return len(PARAM_NAMES[family])


def coerce_family(value) -> Family:
    if isinstance(value, Family):
        return value
    try:
        return Family(str(value).strip().lower().replace("-", "").replace("_", ""))
    except ValueError:
        names = ", ".join(f.value for f in Family)
        raise ValidationError(
            f"unknown family {value!r}; expected one of: {names}"
        ) from None


def validate_param_array(family: Family, theta) -> None:
    """Raise if any parameter vector violates the family's positivity rules."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != n_params(family):
        raise ValidationError(
            f"{family.value} takes {n_params(family)} parameter(s), "
            f"got shape {theta.shape}"
        )
    if not np.all(np.isfinite(theta)):
        raise ValidationError(f"{family.value} parameters must be finite")
    if family is Family.GOMPERTZ:
        # shape may be zero (constant-hazard limit); scale strictly positive
        if np.any(theta[..., 0] < 0) or np.any(theta[..., 1] <= 0):
            raise ValidationError("gompertz requires shape >= 0 and scale > 0")
    elif family is Family.LOGNORMAL:
        if np.any(theta[..., 1] <= 0):
            raise ValidationError("lognormal requires sigma > 0")
    else:
        if np.any(theta <= 0):
            raise ValidationError(f"{family.value} parameters must be > 0")


@dataclass(frozen=True)
class ModelParams:
    """Tagged parameter vector for one treatment arm.

    ``values`` follows :data:`PARAM_NAMES` ordering, e.g.
    ``ModelParams(Family.WEIBULL, (0.5, 0.2))`` is shape 0.5, scale 0.2 in the
    S(t) = exp(-scale * t**shape) parameterisation.
    """

    family: Family
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", coerce_family(self.family))
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        object.__setattr__(self, "values", vals)
        validate_param_array(self.family, np.asarray(vals))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def named(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES[self.family], self.values))


# ---------------------------------------------------------------------------
# exponential integral E1 (upper incomplete gamma at a=0)
#
# Series for x < 1, modified-Lentz continued fraction otherwise; both target
# 1e-8 relative error (in practice they reach near machine precision).

_TINY = 1e-300


def _e1_series(x: np.ndarray) -> np.ndarray:
    # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k * k!)
    out = -EULER_GAMMA - np.log(x)
    term = np.ones_like(x)
    for k in range(1, 40):
        term = term * (-x) / k
        contrib = -term / k
        out = out + contrib
        if np.all(np.abs(contrib) <= 1e-16 * np.abs(out)):
            break
    return out


def _e1_cf_scaled(x: np.ndarray) -> np.ndarray:
    # continued fraction for e^x * E1(x):
    #   1 / (x + 1 - 1/(x + 3 - 4/(x + 5 - 9/(...))))
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for k in range(1, 120):
        a = -float(k * k)
        b = b + 2.0
        d = 1.0 / np.where(np.abs(a * d + b) < _TINY, _TINY, a * d + b)
        c = b + a / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    return h


def exp_scaled_e1(x):
    """``exp(x) * E1(x)``, stable for arbitrarily large x (no overflow)."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0):
        raise ValidationError("exp_scaled_e1 requires x > 0")
    out = np.empty_like(x)
    small = x < 1.0
    if small.any():
        out[small] = np.exp(x[small]) * _e1_series(x[small])
    if (~small).any():
        out[~small] = _e1_cf_scaled(x[~small])
    return float(out[0]) if scalar else out


def exp1(x):
    """Exponential integral E1(x) = Gamma(0, x) for x > 0."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0):
        raise ValidationError("exp1 requires x > 0")
    out = np.empty_like(x)
    small = x < 1.0
    if small.any():
        out[small] = _e1_series(x[small])
    if (~small).any():
        xl = x[~small]
        out[~small] = np.exp(-xl) * _e1_cf_scaled(xl)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# array layer
#
# theta has shape (..., p); t broadcasts against theta[..., 0].  No input
# checking here — callers guarantee validity (the scalar layer checks).


def _gompertz_cumhaz(shape, scale, t):
    # scale/shape * (exp(shape*t) - 1), with the shape -> 0 limit scale*t
    safe = np.where(shape != 0.0, shape, 1.0)
    with np.errstate(over="ignore"):
        ratio = np.where(shape != 0.0, np.expm1(safe * t) / safe, t)
    return scale * ratio


def logsf(family: Family, theta, t):
    """log S(t); t >= 0."""
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    if family is Family.EXPONENTIAL:
        return -theta[..., 0] * t
    if family is Family.WEIBULL:
        nu, lam = theta[..., 0], theta[..., 1]
        return -lam * t**nu
    if family is Family.LOGNORMAL:
        mu, sigma = theta[..., 0], theta[..., 1]
        with np.errstate(divide="ignore"):
            z = (np.log(np.where(t > 0, t, 1.0)) - mu) / sigma
        return np.where(t > 0, log_ndtr(-z), 0.0)
    if family is Family.LOGLOGISTIC:
        beta, scale = theta[..., 0], theta[..., 1]
        with np.errstate(divide="ignore"):
            lr = np.log(np.where(t > 0, t, 1.0)) - np.log(scale)
        return np.where(t > 0, -np.logaddexp(0.0, beta * lr), 0.0)
    if family is Family.GOMPERTZ:
        return -_gompertz_cumhaz(theta[..., 0], theta[..., 1], t)
    raise ValidationError(f"unsupported family {family}")


def loghaz(family: Family, theta, t):
    """log h(t); t > 0 (also defined at t = 0 for exponential/Gompertz)."""
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    if family is Family.EXPONENTIAL:
        return np.log(theta[..., 0]) + 0.0 * t
    if family is Family.WEIBULL:
        nu, lam = theta[..., 0], theta[..., 1]
        return np.log(nu) + np.log(lam) + (nu - 1.0) * np.log(t)
    if family is Family.LOGNORMAL:
        return logpdf(family, theta, t) - logsf(family, theta, t)
    if family is Family.LOGLOGISTIC:
        beta, scale = theta[..., 0], theta[..., 1]
        lr = np.log(t) - np.log(scale)
        return np.log(beta) - np.log(scale) + (beta - 1.0) * lr - np.logaddexp(0.0, beta * lr)
    if family is Family.GOMPERTZ:
        return np.log(theta[..., 1]) + theta[..., 0] * t
    raise ValidationError(f"unsupported family {family}")


def logpdf(family: Family, theta, t):
    """log f(t); t > 0."""
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    if family is Family.LOGNORMAL:
        mu, sigma = theta[..., 0], theta[..., 1]
        z = (np.log(t) - mu) / sigma
        return -np.log(t) - np.log(sigma) - LOG_SQRT_2PI - 0.5 * z * z
    return loghaz(family, theta, t) + logsf(family, theta, t)


def sf(family: Family, theta, t):
    return np.exp(logsf(family, theta, t))


def pdf(family: Family, theta, t):
    return np.exp(logpdf(family, theta, t))


def mean(family: Family, theta):
    """Expected survival time.  Log-logistic with shape <= 1 yields NaN."""
    theta = np.asarray(theta, dtype=float)
    if family is Family.EXPONENTIAL:
        return 1.0 / theta[..., 0]
    if family is Family.WEIBULL:
        nu, lam = theta[..., 0], theta[..., 1]
        return np.exp(gammaln(1.0 + 1.0 / nu) - np.log(lam) / nu)
    if family is Family.LOGNORMAL:
        mu, sigma = theta[..., 0], theta[..., 1]
        return np.exp(mu + 0.5 * sigma * sigma)
    if family is Family.LOGLOGISTIC:
        beta, scale = theta[..., 0], theta[..., 1]
        with np.errstate(invalid="ignore"):
            x = np.pi / beta
            out = scale * x / np.sin(x)
        return np.where(beta > 1.0, out, np.nan)
    if family is Family.GOMPERTZ:
        shape, scale = np.broadcast_arrays(theta[..., 0], theta[..., 1])
        shape = np.atleast_1d(np.asarray(shape, dtype=float))
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        out = np.full(shape.shape, np.nan)
        finite = np.isfinite(shape) & np.isfinite(scale) & (scale > 0)
        zero = finite & (shape == 0.0)
        pos = finite & (shape > 0.0)
        if zero.any():
            out[zero] = 1.0 / scale[zero]
        if pos.any():
            out[pos] = exp_scaled_e1(scale[pos] / shape[pos]) / shape[pos]
        return float(out[0]) if theta.ndim == 1 else out
    raise ValidationError(f"unsupported family {family}")


def median(family: Family, theta):
    theta = np.asarray(theta, dtype=float)
    ln2 = math.log(2.0)
    if family is Family.EXPONENTIAL:
        return ln2 / theta[..., 0]
    if family is Family.WEIBULL:
        nu, lam = theta[..., 0], theta[..., 1]
        return (ln2 / lam) ** (1.0 / nu)
    if family is Family.LOGNORMAL:
        return np.exp(theta[..., 0])
    if family is Family.LOGLOGISTIC:
        return theta[..., 1] + 0.0
    if family is Family.GOMPERTZ:
        shape, scale = theta[..., 0], theta[..., 1]
        safe = np.where(shape != 0.0, shape, 1.0)
        return np.where(shape != 0.0, np.log1p(safe / scale * ln2) / safe, ln2 / scale)
    raise ValidationError(f"unsupported family {family}")


# ---------------------------------------------------------------------------
# checked scalar layer


def _check_time(t, positive: bool) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError("time must be finite")
    if positive and t <= 0:
        raise ValidationError(f"time must be > 0, got {t}")
    if not positive and t < 0:
        raise ValidationError(f"time must be >= 0, got {t}")
    return t


def survival(params: ModelParams, t) -> float:
    """S(t) for t >= 0; S(0) = 1, non-increasing in t."""
    t = _check_time(t, positive=False)
    return float(np.exp(logsf(params.family, params.as_array(), t)))


def log_density(params: ModelParams, t) -> float:
    """log f(t) for t > 0."""
    t = _check_time(t, positive=True)
    return float(logpdf(params.family, params.as_array(), t))


def hazard(params: ModelParams, t) -> float:
    """h(t) = f(t)/S(t); t > 0, or t >= 0 where the limit exists."""
    at_zero_ok = params.family in (Family.EXPONENTIAL, Family.GOMPERTZ)
    t = _check_time(t, positive=not at_zero_ok)
    theta = params.as_array()
    ls = float(logsf(params.family, theta, t))
    if np.exp(ls) == 0.0:
        raise OverflowError(f"S({t}) underflows to 0; hazard overflows")
    return float(np.exp(loghaz(params.family, theta, t)))


def mean_survival(params: ModelParams) -> float:
    """E[T] in years.  Undefined for log-logistic shape <= 1."""
    value = float(mean(params.family, params.as_array()))
    if math.isnan(value):
        raise ValidationError("mean survival is undefined for log-logistic shape <= 1")
    return value


def median_survival(params: ModelParams) -> float:
    return float(median(params.family, params.as_array()))


def gompertz_mode(params: ModelParams) -> float:
    """Density mode of a Gompertz; negative iff shape < scale."""
    if params.family is not Family.GOMPERTZ:
        raise ValidationError("gompertz_mode only applies to the gompertz family")
    shape, scale = params.values
    if shape == 0:
        raise ValidationError("gompertz mode requires shape > 0")
    return math.log(shape / scale) / shape


def normal_cdf(x):
    """Standard normal CDF (exported for oracle construction in tests)."""
    return ndtr(x)
