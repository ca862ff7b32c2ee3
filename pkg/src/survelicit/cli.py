"""Command-line front end.

Exit codes: 0 success, 2 validation error (bad inputs, bad config), 3
numerical failure (optimizer divergence, infeasible spec, zero evidence).
Thread count for the evidence reduction comes from SURVELICIT_THREADS.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import families as fam
from .data_io import (
    default_config,
    load_config,
    load_dataset,
    save_config,
    synthetic_dataset,
    write_csv,
)
from .elicitation import fit_beta_from_quartiles, fit_normal_from_quartiles, sample_prior
from .errors import SurvElicitError, ValidationError
from .evidence import compute_bme
from .infocrit import mle_fit
from .nonparametric import empirical_hazard, kaplan_meier
from .posterior import posterior_summary, run_mh
from .report import run_report
from .weights import dilution_prior, hellinger_matrix, scheme_prior

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def survelicit_errors(fn):
    """Map package exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (SurvElicitError, OverflowError, FloatingPointError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _resolve_config(config_path, out, seed, n, families):
    cfg = load_config(config_path) if config_path else default_config()
    if out:
        cfg.output_dir = str(out)
    if seed is not None:
        cfg.seed = seed
    if n is not None:
        cfg.n_prior_draws = n
    if families:
        cfg.families = [fam.coerce_family(f) for f in families.split(",")]
    return cfg


def _load_data(cfg, no_data):
    if no_data:
        return synthetic_dataset(seed=cfg.seed)
    if not cfg.dataset_path:
        raise ValidationError(
            "this command needs a dataset: set dataset.path in the config or pass --no-data"
        )
    return load_dataset(cfg.dataset_path, cfg.dataset_unit)


config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                             help="run configuration JSON")
out_option = click.option("--out", type=click.Path(), default=None, help="output directory")
seed_option = click.option("--seed", type=int, default=None, help="master seed")
n_option = click.option("--N", "n", type=int, default=None, help="prior/evidence draw count")
j_option = click.option("--J", "n_times", type=int, default=None,
                        help="uniform survival times for distance estimation")
families_option = click.option("--families", default=None,
                               help="comma-separated family subset")
no_data_option = click.option("--no-data", is_flag=True,
                              help="use the synthetic stand-in dataset")


@click.group()
@click.version_option(__version__)
def main():
    """Prior-informed survival model comparison."""


@main.command("fit-prior")
@click.argument("q25", type=float)
@click.argument("q50", type=float)
@click.argument("q75", type=float)
@click.option("--kind", type=click.Choice(["beta", "normal"]), default="beta")
@survelicit_errors
def fit_prior(q25, q50, q75, kind):
    """Fit a distribution to elicited quartiles and print it."""
    if kind == "beta":
        res = fit_beta_from_quartiles(q25, q50, q75)
    else:
        res = fit_normal_from_quartiles(q25, q50, q75)
    click.echo(f"{res.dist.label()}  residual={res.residual:.3e}")


@main.command("sample-prior")
@config_option
@out_option
@seed_option
@n_option
@click.option("--family", required=True)
@survelicit_errors
def sample_prior_cmd(config_path, out, seed, n, family):
    """Sample the joint prior for one family; print acceptance and summaries."""
    cfg = _resolve_config(config_path, out, seed, n, None)
    family = fam.coerce_family(family)
    draws = sample_prior(family, cfg.prior, cfg.n_prior_draws, seed=cfg.seed)
    click.echo(f"accepted {draws.n} draws, acceptance_rate={draws.acceptance_rate:.4f}")
    for arm in (1, 2):
        stat = posterior_summary(draws, "mean", arm=arm)
        click.echo(
            f"arm {arm} prior mean survival: {stat.point:.3f} "
            f"({stat.ci_lower:.3f}, {stat.ci_upper:.3f})"
        )
    if out:
        path = Path(out) / f"prior_draws_{family.value}.csv"
        names = fam.PARAM_NAMES[family]
        write_csv(
            path,
            ["s1_t0", "s1_t1", "s2_t0", "s2_t1"]
            + [f"arm1_{p}" for p in names]
            + [f"arm2_{p}" for p in names],
            np.column_stack(
                [draws.s1_t0, draws.s1_t1, draws.s2_t0, draws.s2_t1,
                 draws.params1, draws.params2]
            ),
        )
        click.echo(f"wrote {path}")


@main.command("bme")
@config_option
@out_option
@seed_option
@n_option
@families_option
@no_data_option
@click.option("--arm", type=int, default=None, help="restrict to one arm")
@survelicit_errors
def bme_cmd(config_path, out, seed, n, families, no_data, arm):
    """Monte Carlo model evidence per family and arm; write trace CSVs."""
    cfg = _resolve_config(config_path, out, seed, n, families)
    data = _load_data(cfg, no_data)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arms = [arm] if arm else data.arms_present()
    for idx, family in enumerate(cfg.families):
        prior = sample_prior(family, cfg.prior, cfg.n_prior_draws, seed=cfg.seed)
        for a in arms:
            ev = compute_bme(family, prior, data, a)
            click.echo(
                f"{family.value} arm {a}: log_bme={ev.log_bme:.4f} "
                f"(mc se {ev.mc_standard_error:.4f})"
            )
            trace_path = out_dir / f"bme_trace_{family.value}_arm{a}.csv"
            write_csv(trace_path, ["N", "cum_log_bme"], ev.trace)


@main.command("weights")
@config_option
@out_option
@seed_option
@n_option
@j_option
@families_option
@click.option("--scheme", default=None, help="weight scheme (default from config)")
@click.option("--arm", type=int, default=1)
@survelicit_errors
def weights_cmd(config_path, out, seed, n, n_times, families, scheme, arm):
    """Prior model weights (dilution or a non-informative scheme)."""
    cfg = _resolve_config(config_path, out, seed, n, families)
    if n_times is not None:
        cfg.hellinger_n_times = n_times
    scheme = scheme or cfg.weight_scheme
    if scheme == "dilution":
        models = [
            (family, sample_prior(family, cfg.prior, cfg.n_prior_draws, seed=cfg.seed))
            for family in cfg.families
        ]
        dm = hellinger_matrix(
            models, arm=arm,
            n_times=cfg.hellinger_n_times,
            n_draws=min(cfg.hellinger_n_draws, cfg.n_prior_draws),
            y_max=cfg.hellinger_y_max,
            seed=cfg.seed,
            variant=cfg.hellinger_variant,
        )
        table = dilution_prior(dm)
    else:
        table = scheme_prior(scheme, cfg.families, f1=cfg.anchored_f1)
    for family, w in zip(table.families, table.prior):
        click.echo(f"{family.value}: {w:.6f}")
    if out:
        path = Path(out) / f"prior_weights_arm{arm}.csv"
        write_csv(path, ["family", "prior_weight"],
                  [(f.value, w) for f, w in zip(table.families, table.prior)])
        click.echo(f"wrote {path}")


@main.command("posterior")
@config_option
@out_option
@seed_option
@families_option
@no_data_option
@survelicit_errors
def posterior_cmd(config_path, out, seed, families, no_data):
    """Posterior summaries of mean survival per family (joint arms).

    With --out, the retained draws are written one row per draw.
    """
    cfg = _resolve_config(config_path, out, seed, None, families)
    data = _load_data(cfg, no_data)
    for idx, family in enumerate(cfg.families):
        post = run_mh(
            family, cfg.prior, data,
            iterations=cfg.mh_iterations, burn_in=cfg.mh_burn_in,
            thin=cfg.mh_thin, chains=cfg.mh_chains, seed=cfg.seed + idx,
        )
        parts = []
        for arm in data.arms_present():
            s = posterior_summary(post, "mean", arm=arm)
            parts.append(f"arm{arm} {s.point:.2f} ({s.ci_lower:.2f}, {s.ci_upper:.2f})")
        if len(data.arms_present()) == 2:
            inc = posterior_summary(post, "incremental_mean")
            parts.append(f"incr {inc.point:.2f} ({inc.ci_lower:.2f}, {inc.ci_upper:.2f})")
        click.echo(f"{family.value}: " + "; ".join(parts))
        if out:
            names = fam.PARAM_NAMES[family]
            path = Path(out) / f"posterior_draws_{family.value}.csv"
            write_csv(
                path,
                ["s1_t0", "s1_t1", "s2_t0", "s2_t1"]
                + [f"arm1_{p}" for p in names]
                + [f"arm2_{p}" for p in names],
                np.column_stack(
                    [post.s1_t0, post.s1_t1, post.s2_t0, post.s2_t1,
                     post.params1, post.params2]
                ),
            )
            click.echo(f"wrote {path}")


@main.command("km")
@config_option
@out_option
@seed_option
@no_data_option
@click.option("--arm", type=int, default=1)
@survelicit_errors
def km_cmd(config_path, out, seed, no_data, arm):
    """Kaplan-Meier estimate for one arm."""
    cfg = _resolve_config(config_path, out, seed, None, None)
    data = _load_data(cfg, no_data)
    km = kaplan_meier(data, arm)
    click.echo(f"arm {arm}: {km.times.size} distinct event times")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"km_arm{arm}.csv"
    write_csv(path, ["time", "survival", "at_risk", "events"],
              zip(km.times, km.survival, km.at_risk, km.events))
    click.echo(f"wrote {path}")


@main.command("hazard")
@config_option
@out_option
@seed_option
@no_data_option
@click.option("--arm", type=int, default=1)
@click.option("--bin-width", type=float, default=None)
@survelicit_errors
def hazard_cmd(config_path, out, seed, no_data, arm, bin_width):
    """Binned empirical hazard with 95% CIs for one arm."""
    cfg = _resolve_config(config_path, out, seed, None, None)
    data = _load_data(cfg, no_data)
    hz = empirical_hazard(data, arm, bin_width or cfg.hazard_bin_width)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"hazard_arm{arm}.csv"
    write_csv(
        path,
        ["bin_start", "bin_end", "hazard", "ci_lower", "ci_upper", "events", "person_time"],
        zip(hz.edges[:-1], hz.edges[1:], hz.hazard, hz.ci_lower, hz.ci_upper,
            hz.events, hz.person_time),
    )
    click.echo(f"wrote {path}")


@main.command("ic")
@config_option
@out_option
@seed_option
@families_option
@no_data_option
@survelicit_errors
def ic_cmd(config_path, out, seed, families, no_data):
    """Maximum-likelihood fits with AIC/BIC per family and arm."""
    cfg = _resolve_config(config_path, out, seed, None, families)
    data = _load_data(cfg, no_data)
    for arm in data.arms_present():
        for family in cfg.families:
            fit = mle_fit(family, data, arm)
            click.echo(
                f"arm {arm} {family.value}: logL={fit.log_likelihood:.3f} "
                f"AIC={fit.aic:.3f} BIC={fit.bic:.3f}"
            )


@main.command("report")
@config_option
@out_option
@seed_option
@n_option
@j_option
@families_option
@no_data_option
@click.option("--scheme", default=None, help="override the weight scheme")
@survelicit_errors
def report_cmd(config_path, out, seed, n, n_times, families, no_data, scheme):
    """Run the full pipeline and emit all tables and figures."""
    cfg = _resolve_config(config_path, out, seed, n, families)
    if n_times is not None:
        cfg.hellinger_n_times = n_times
    if scheme:
        cfg.weight_scheme = scheme
    bundle = run_report(cfg, use_synthetic=no_data, log=lambda m: click.echo(m))
    click.echo(f"report written to {bundle.output_dir}")
    for name, path in {**bundle.tables, **bundle.figures}.items():
        click.echo(f"  {name}: {path}")


@main.command("init-config")
@click.argument("path", type=click.Path())
@survelicit_errors
def init_config(path):
    """Write the shipped example configuration to PATH."""
    save_config(path, default_config())
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
