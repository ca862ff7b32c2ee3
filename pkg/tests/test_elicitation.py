import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, stats

import survelicit.families as fam
from survelicit.elicitation import (
    ConstraintSet,
    ElicitedQuantity,
    PointMassDist,
    PriorSpec,
    QUANTITY_NAMES,
    exact_exponential_prior_density,
    fit_beta_from_quartiles,
    fit_normal_from_quartiles,
    fit_scaled_beta_from_quartiles,
    sample_prior,
    transform_to_params,
)
from survelicit.errors import InfeasibleSpecError, ValidationError
from survelicit.families import Family


def example_spec(constraints=None):
    """The case-study elicitation: quartiles at 5 and 10 years."""
    quantities = {
        "S1_t0": ElicitedQuantity.from_quartiles("S1_t0", 0.37, 0.40, 0.45),
        "delta11": ElicitedQuantity.from_quartiles("delta11", 0.26, 0.30, 0.35),
        "delta21": ElicitedQuantity.from_quartiles("delta21", 0.01, 0.05, 0.10, kind="normal"),
        "delta22": ElicitedQuantity.from_quartiles("delta22", 0.25, 0.30, 0.37),
    }
    return PriorSpec(
        t0=5.0, t1=10.0, quantities=quantities,
        constraints=constraints or ConstraintSet(),
    )


# ---------------------------------------------------------------------------
# quartile fitting


@pytest.mark.parametrize(
    "quartiles, expected",
    [
        ((0.37, 0.40, 0.45), (27.09, 39.58)),
        ((0.26, 0.30, 0.35), (14.51, 33.09)),
        ((0.25, 0.30, 0.37), (8.33, 18.61)),
    ],
)
def test_beta_fit_reproduces_reference_values(quartiles, expected):
    res = fit_beta_from_quartiles(*quartiles)
    assert res.dist.alpha == pytest.approx(expected[0], abs=0.5)
    assert res.dist.beta == pytest.approx(expected[1], abs=0.5)
    assert res.converged


def test_beta_fit_recovers_known_beta_from_its_own_quartiles():
    # quartiles of Beta(2,2) by root-finding on its CDF 3x^2 - 2x^3
    cdf = lambda x: 3 * x**2 - 2 * x**3
    qs = [optimize.brentq(lambda x: cdf(x) - p, 0.0, 1.0) for p in (0.25, 0.5, 0.75)]
    assert qs[1] == pytest.approx(0.5, abs=1e-12)
    res = fit_beta_from_quartiles(*qs)
    assert res.dist.alpha == pytest.approx(2.0, abs=0.05)
    assert res.dist.beta == pytest.approx(2.0, abs=0.05)


def test_beta_fit_refit_is_stable():
    res = fit_beta_from_quartiles(0.37, 0.40, 0.45)
    own_q = res.dist.ppf(np.array([0.25, 0.5, 0.75]))
    refit = fit_beta_from_quartiles(*own_q)
    assert refit.dist.alpha == pytest.approx(res.dist.alpha, rel=1e-3)
    assert refit.dist.beta == pytest.approx(res.dist.beta, rel=1e-3)


def test_beta_fit_rejects_bad_quartiles():
    with pytest.raises(ValidationError):
        fit_beta_from_quartiles(0.4, 0.4, 0.45)
    with pytest.raises(ValidationError):
        fit_beta_from_quartiles(0.5, 0.4, 0.45)
    with pytest.raises(ValidationError):
        fit_beta_from_quartiles(-0.1, 0.4, 0.45)


def test_normal_fit_closed_form():
    res = fit_normal_from_quartiles(0.01, 0.05, 0.10)
    assert res.dist.mean == pytest.approx(0.0533, abs=2e-4)
    assert res.dist.sd == pytest.approx(0.0667, abs=2e-4)

    res2 = fit_normal_from_quartiles(-1.0, 0.0, 1.0)
    assert res2.dist.mean == pytest.approx(0.0, abs=1e-12)
    assert res2.dist.sd == pytest.approx(1.0 / 0.6744897501960817, rel=1e-10)


def test_normal_fit_zero_spread_errors():
    with pytest.raises(ValidationError):
        fit_normal_from_quartiles(0.0, 0.0, 0.0)


def test_normal_fit_refit_recovers_exactly():
    res = fit_normal_from_quartiles(0.01, 0.05, 0.10)
    qs = res.dist.ppf(np.array([0.25, 0.5, 0.75]))
    refit = fit_normal_from_quartiles(*qs)
    assert refit.dist.mean == pytest.approx(res.dist.mean, abs=1e-12)
    assert refit.dist.sd == pytest.approx(res.dist.sd, rel=1e-12)


def test_scaled_beta_fit_round_trip():
    res = fit_scaled_beta_from_quartiles(0.01, 0.05, 0.10, -0.2, 0.3)
    qs = [float(res.dist.ppf(p)) for p in (0.25, 0.5, 0.75)]
    assert qs == pytest.approx([0.01, 0.05, 0.10], abs=5e-3)


# ---------------------------------------------------------------------------
# transforms


def test_weibull_transform_exponential_reduction():
    tp = transform_to_params(Family.WEIBULL, 0.4, 0.16, 5, 10)
    shape, scale = tp.params.values
    assert shape == pytest.approx(1.0, abs=1e-12)
    assert scale == pytest.approx(-math.log(0.4) / 5, rel=1e-12)


def test_lognormal_transform_example():
    tp = transform_to_params(Family.LOGNORMAL, 0.5, 0.3, 5, 10)
    mu, sigma = tp.params.values
    assert mu == pytest.approx(math.log(5), rel=1e-9)
    assert sigma == pytest.approx(math.log(2) / 0.5244005127080407, rel=1e-9)
    # verify the claimed identity: the params reproduce the inputs
    assert tp.achieved_s_t0 == pytest.approx(0.5, abs=1e-9)
    assert tp.achieved_s_t1 == pytest.approx(0.3, abs=1e-9)
    # intermediates satisfy their defining identities
    assert tp.extras["gamma0"] == pytest.approx(-mu / sigma, rel=1e-9)
    assert tp.extras["gamma1"] == pytest.approx(1.0 / sigma, rel=1e-9)


def test_loglogistic_transform_example():
    tp = transform_to_params(Family.LOGLOGISTIC, 0.5, 0.3, 5, 10)
    shape, scale = tp.params.values
    assert scale == pytest.approx(5.0, rel=1e-9)
    assert shape == pytest.approx(math.log(7 / 3) / math.log(2), rel=1e-9)
    # failure-odds identity (t/theta)^beta = (1-S)/S at both times
    for t, s in ((5, 0.5), (10, 0.3)):
        assert (t / scale) ** shape == pytest.approx((1 - s) / s, rel=1e-9)
    assert tp.extras["alpha"] == pytest.approx(-shape * math.log(scale), rel=1e-9)


def test_gompertz_transform_example():
    tp = transform_to_params(Family.GOMPERTZ, 0.5, 0.2, 5, 10)
    shape, scale = tp.params.values
    # interval hazards are the defining identities
    h1 = -math.log(0.5) / 5
    h2 = -math.log(0.2 / 0.5) / 5
    assert shape == pytest.approx(math.log(h2 / h1) / 5, rel=1e-12)
    assert scale == pytest.approx(
        math.exp((10 * math.log(h1) - 5 * math.log(h2)) / 5), rel=1e-12
    )
    assert shape == pytest.approx(0.0558, abs=5e-4)
    assert scale == pytest.approx(0.1049, abs=5e-4)
    # fitted hazard at t0 equals the first interval hazard
    assert scale * math.exp(shape * 5) == pytest.approx(h1, rel=1e-9)
    # achieved (approximate) survival is reported
    assert tp.achieved_s_t0 == pytest.approx(
        fam.survival(tp.params, 5.0), abs=1e-12
    )


def test_exponential_transform_example():
    tp = transform_to_params(Family.EXPONENTIAL, 0.406, None, 5, 10)
    (rate,) = tp.params.values
    assert rate == pytest.approx(-math.log(0.406) / 5, rel=1e-12)
    assert math.exp(-5 * rate) == pytest.approx(0.406, rel=1e-12)


def test_transform_monotonicity_error():
    with pytest.raises(ValidationError):
        transform_to_params(Family.WEIBULL, 0.4, 0.5, 5, 10)
    with pytest.raises(ValidationError):
        transform_to_params(Family.LOGNORMAL, 0.4, 0.4, 5, 10)


@settings(max_examples=80, deadline=None)
@given(
    s0=st.floats(0.05, 0.95),
    drop=st.floats(0.05, 0.9),
    family=st.sampled_from([Family.WEIBULL, Family.LOGNORMAL, Family.LOGLOGISTIC]),
)
def test_transform_round_trip_property(s0, drop, family):
    s1 = s0 * (1.0 - drop)
    try:
        tp = transform_to_params(family, s0, s1, 5, 10)
    except ValidationError:
        return  # parameter went out of range; rejection is the contract
    assert fam.survival(tp.params, 5.0) == pytest.approx(s0, abs=1e-9)
    assert fam.survival(tp.params, 10.0) == pytest.approx(s1, abs=1e-9)


def test_exponential_round_trip():
    for s0 in (0.1, 0.45, 0.9):
        tp = transform_to_params(Family.EXPONENTIAL, s0, None, 5, 10)
        assert fam.survival(tp.params, 5.0) == pytest.approx(s0, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(s0=st.floats(0.1, 0.9), drop=st.floats(0.1, 0.85))
def test_gompertz_piecewise_hazard_reconstruction(s0, drop):
    """The Gompertz construction reproduces the inputs through its
    interval-hazard representation (the closed-form S only approximates)."""
    s1 = s0 * (1.0 - drop)
    try:
        tp = transform_to_params(Family.GOMPERTZ, s0, s1, 5, 10)
    except ValidationError:
        return
    shape, scale = tp.params.values
    h1 = scale * math.exp(shape * 5.0)
    h2 = scale * math.exp(shape * 10.0)
    s0_rec = math.exp(-h1 * 5.0)
    s1_rec = s0_rec * math.exp(-h2 * 5.0)
    assert s0_rec == pytest.approx(s0, abs=1e-3)
    assert s1_rec == pytest.approx(s1, abs=1e-3)
    # and the reported achieved values are the actual model survival
    assert tp.achieved_s_t0 == pytest.approx(fam.survival(tp.params, 5.0), abs=1e-12)
    assert tp.achieved_s_t1 == pytest.approx(fam.survival(tp.params, 10.0), abs=1e-12)


# ---------------------------------------------------------------------------
# prior sampling


def test_gompertz_acceptance_rate_near_reference():
    draws = sample_prior(Family.GOMPERTZ, example_spec(), 50_000, seed=2024)
    assert draws.acceptance_rate == pytest.approx(0.23, abs=0.05)


def test_point_mass_exponential_draws_identical():
    quantities = {
        "S1_t0": ElicitedQuantity.point_mass("S1_t0", 0.4),
        "delta11": ElicitedQuantity.point_mass("delta11", 0.3),
        "delta21": ElicitedQuantity.point_mass("delta21", 0.05),
        "delta22": ElicitedQuantity.point_mass("delta22", 0.3),
    }
    spec = PriorSpec(t0=5.0, t1=10.0, quantities=quantities)
    draws = sample_prior(Family.EXPONENTIAL, spec, 500, seed=1)
    assert draws.acceptance_rate == 1.0
    assert np.unique(draws.params1).size == 1
    assert draws.params1[0, 0] == pytest.approx(-math.log(0.4) / 5)


def test_sampler_is_deterministic():
    a = sample_prior(Family.WEIBULL, example_spec(), 2000, seed=7)
    b = sample_prior(Family.WEIBULL, example_spec(), 2000, seed=7)
    assert np.array_equal(a.params1, b.params1)
    assert np.array_equal(a.params2, b.params2)
    assert a.acceptance_rate == b.acceptance_rate
    c = sample_prior(Family.WEIBULL, example_spec(), 2000, seed=8)
    assert not np.array_equal(a.params1, c.params1)


def test_all_draws_satisfy_constraints():
    spec = example_spec()
    for family in Family:
        draws = sample_prior(family, spec, 3000, seed=3)
        assert np.all(draws.s1_t0 > draws.s1_t1)
        assert np.all(draws.s2_t0 > draws.s2_t1)
        assert np.all((draws.s2_t0 > 0) & (draws.s2_t0 < 1))
        for arm in (1, 2):
            theta = draws.arm_params(arm)
            assert np.all(np.isfinite(theta))
            m = fam.mean(family, theta)
            assert np.all(m <= spec.constraints.mean_cap + 1e-9)
        if family is Family.WEIBULL:
            lo, hi = spec.constraints.weibull_shape_range
            for arm in (1, 2):
                nu = draws.arm_params(arm)[:, 0]
                assert np.all((nu >= lo) & (nu <= hi))
        if family is Family.LOGLOGISTIC:
            assert np.all(draws.params1[:, 0] > 1)
            assert np.all(draws.params2[:, 0] > 1)
        if family is Family.GOMPERTZ:
            assert np.all(draws.params1[:, 0] > 0)
            assert np.all(draws.params2[:, 0] > 0)
            # default scope: control arm must have shape > scale
            assert np.all(draws.params1[:, 0] > draws.params1[:, 1])


def test_accepted_draws_give_monotone_survival_curves():
    grid = np.linspace(0.0, 100.0, 201)
    for family in Family:
        draws = sample_prior(family, example_spec(), 200, seed=5)
        for arm in (1, 2):
            s = np.exp(fam.logsf(family, draws.arm_params(arm)[:, None, :], grid[None, :]))
            assert np.all(np.diff(s, axis=1) <= 1e-12)


def test_parameter_constraints_preserve_elicited_marginal():
    """Family-specific (parameter) constraints must not distort the S1(t0)
    marginal beyond what the inequality constraints already imply."""
    spec = example_spec()
    relaxed = ConstraintSet(
        mean_cap=1e12,
        weibull_shape_range=(1e-9, 1e9),
        gompertz_requires_theta_gt_lambda=False,
        loglogistic_requires_finite_mean=False,
    )
    n = 200_000
    base = sample_prior(Family.WEIBULL, spec.with_constraints(relaxed), n, seed=11)
    full = sample_prior(Family.WEIBULL, spec, n, seed=11)
    a, b = np.sort(base.s1_t0), np.sort(full.s1_t0)
    grid = np.concatenate([a, b])
    f1 = np.searchsorted(a, grid, side="right") / a.size
    f2 = np.searchsorted(b, grid, side="right") / b.size
    assert np.abs(f1 - f2).max() < 0.01


def test_marginal_matches_fitted_beta_when_inequalities_never_bind():
    """With well-separated quantities the inequality constraints almost never
    fire, and the sampled S1(t0) marginal is the fitted Beta itself."""
    quantities = {
        "S1_t0": ElicitedQuantity.from_quartiles("S1_t0", 0.38, 0.40, 0.42),
        "delta11": ElicitedQuantity.from_quartiles("delta11", 0.18, 0.20, 0.22),
        "delta21": ElicitedQuantity.from_quartiles("delta21", 0.03, 0.05, 0.07, kind="normal"),
        "delta22": ElicitedQuantity.from_quartiles("delta22", 0.18, 0.20, 0.22),
    }
    spec = PriorSpec(
        t0=5.0,
        t1=10.0,
        quantities=quantities,
        constraints=ConstraintSet(
            mean_cap=1e12,
            weibull_shape_range=(1e-9, 1e9),
            gompertz_requires_theta_gt_lambda=False,
            loglogistic_requires_finite_mean=False,
        ),
    )
    draws = sample_prior(Family.WEIBULL, spec, 300_000, seed=13)
    assert draws.acceptance_rate > 0.995
    dist = spec.quantity("S1_t0").dist
    x = np.sort(draws.s1_t0)
    ks = np.max(np.abs(dist.cdf(x) - np.arange(1, x.size + 1) / x.size))
    assert ks < 0.01


def test_weibull_sampled_quartiles_track_fitted_beta():
    """Quartiles of sampled S1(t0) under the full constraint set equal those
    under the inequality constraints alone (within MC noise), and both sit
    within ~0.02 of the fitted Beta's quartiles for the example elicitation
    (the inequality rejections shift the marginal slightly upward)."""
    spec = example_spec()
    draws = sample_prior(Family.WEIBULL, spec, 200_000, seed=17)
    fitted = spec.quantity("S1_t0").dist
    beta_q = [
        optimize.brentq(lambda x, p=p: fitted.cdf(x) - p, 1e-9, 1 - 1e-9)
        for p in (0.25, 0.5, 0.75)
    ]
    sample_q = np.percentile(draws.s1_t0, [25, 50, 75])
    relaxed = ConstraintSet(
        mean_cap=1e12,
        weibull_shape_range=(1e-9, 1e9),
        gompertz_requires_theta_gt_lambda=False,
        loglogistic_requires_finite_mean=False,
    )
    base = sample_prior(Family.WEIBULL, spec.with_constraints(relaxed), 200_000, seed=17)
    base_q = np.percentile(base.s1_t0, [25, 50, 75])
    assert np.abs(sample_q - base_q).max() < 0.01
    assert np.abs(sample_q - np.asarray(beta_q)).max() < 0.025


def test_scaled_beta_difference_samples_and_respects_support():
    quantities = {
        "S1_t0": ElicitedQuantity.from_quartiles("S1_t0", 0.37, 0.40, 0.45),
        "delta11": ElicitedQuantity.from_quartiles("delta11", 0.26, 0.30, 0.35),
        "delta21": ElicitedQuantity.from_quartiles(
            "delta21", 0.01, 0.05, 0.10, kind="scaled_beta", support=(-0.2, 0.3)
        ),
        "delta22": ElicitedQuantity.from_quartiles("delta22", 0.25, 0.30, 0.37),
    }
    spec = PriorSpec(t0=5.0, t1=10.0, quantities=quantities)
    draws = sample_prior(Family.WEIBULL, spec, 20_000, seed=23)
    d21 = draws.s2_t0 - draws.s1_t0
    assert np.all((d21 > -0.2) & (d21 < 0.3))
    # fitted quartiles are recovered by the sampled differences
    q = np.percentile(d21, [25, 50, 75])
    assert np.abs(q - [0.01, 0.05, 0.10]).max() < 0.02


def test_infeasible_spec_raises_with_constraint_name():
    quantities = {
        # delta11 nearly always exceeds S1(t0): S1(t1) < 0 almost surely
        "S1_t0": ElicitedQuantity.from_quartiles("S1_t0", 0.08, 0.10, 0.12),
        "delta11": ElicitedQuantity.from_quartiles("delta11", 0.60, 0.65, 0.70),
        "delta21": ElicitedQuantity.from_quartiles("delta21", 0.01, 0.05, 0.10, kind="normal"),
        "delta22": ElicitedQuantity.from_quartiles("delta22", 0.25, 0.30, 0.37),
    }
    spec = PriorSpec(t0=5.0, t1=10.0, quantities=quantities)
    with pytest.raises(InfeasibleSpecError) as err:
        sample_prior(Family.WEIBULL, spec, 1000, seed=1)
    assert err.value.worst_constraint == "s1_t1_positive"


def test_prior_spec_validation():
    qs = example_spec().quantities
    with pytest.raises(ValidationError):
        PriorSpec(t0=10.0, t1=5.0, quantities=qs)
    with pytest.raises(ValidationError):
        PriorSpec(t0=5.0, t1=10.0, x0=6.0, quantities=qs)
    with pytest.raises(ValidationError):
        PriorSpec(t0=5.0, t1=10.0, quantities={k: qs[k] for k in list(qs)[:2]})


# ---------------------------------------------------------------------------
# exact induced density for the exponential rate


def test_exact_density_uniform_case_is_unit_exponential():
    lam = np.linspace(0.01, 5, 50)
    np.testing.assert_allclose(
        exact_exponential_prior_density(lam, 1.0, 1.0, 1.0), np.exp(-lam), rtol=1e-12
    )


def test_exact_density_normalizes():
    total = integrate.quad(
        lambda lam: exact_exponential_prior_density(lam, 27.09, 39.58, 5.0), 0, 10,
        limit=200,
    )[0]
    assert total == pytest.approx(1.0, abs=1e-3)


def test_sampled_rates_match_exact_density():
    """KS of 1e6 sampled rates against the closed-form induced density."""
    quantities = {
        "S1_t0": ElicitedQuantity.from_quartiles("S1_t0", 0.37, 0.40, 0.45),
        "delta11": ElicitedQuantity.point_mass("delta11", 0.3),
        "delta21": ElicitedQuantity.point_mass("delta21", 0.0),
        "delta22": ElicitedQuantity.point_mass("delta22", 0.3),
    }
    spec = PriorSpec(
        t0=5.0, t1=10.0, quantities=quantities,
        constraints=ConstraintSet(mean_cap=1e12),
    )
    draws = sample_prior(Family.EXPONENTIAL, spec, 1_000_000, seed=21)
    assert draws.acceptance_rate == 1.0
    dist = spec.quantity("S1_t0").dist
    lam = np.sort(draws.params1[:, 0])
    # F(lam) = P(S > exp(-lam t0)) under the fitted beta
    cdf = stats.beta.sf(np.exp(-lam * 5.0), dist.alpha, dist.beta)
    ks = np.max(np.abs(cdf - np.arange(1, lam.size + 1) / lam.size))
    assert ks < 0.01


def test_exact_density_domain_checks():
    with pytest.raises(ValidationError):
        exact_exponential_prior_density(0.5, -1.0, 2.0, 5.0)
    with pytest.raises(ValidationError):
        exact_exponential_prior_density(-0.5, 1.0, 2.0, 5.0)
