"""Command-line driver for the secrecy power-allocation experiments.

Exit codes: 0 on success, 1 on invalid input (configuration or flags),
2 when a solver stopped without converging. CSV goes to ``--out`` or to
standard output; with ``--plot`` a PNG with the same stem is written next
to the CSV file.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .equilibrium import uniqueness_probe
from .experiments import (
    MODES,
    SweepSpec,
    Table,
    format_value,
    parse_modes,
    parse_snr_list,
    parse_snr_range,
    price_of_anarchy,
    run_convergence_experiment,
    run_sweep,
)
from .model import ConfigError, ConfigValidationError, load_config, with_snr
from .rates import concavity_certificate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2


class NotConverged(click.ClickException):
    exit_code = EXIT_NOT_CONVERGED


def _load(path: str, snr: float | None = None):
    try:
        cfg = load_config(path)
    except ConfigValidationError as exc:
        lines = [f"{d.field}: {d.message}" for d in exc.diagnostics]
        raise click.ClickException("invalid configuration:\n  " + "\n  ".join(lines)) from None
    except (ConfigError, OSError) as exc:
        raise click.ClickException(str(exc)) from None
    if snr is not None:
        if not snr > 0:
            raise click.BadParameter("must be positive", param_hint="--snr")
        cfg = with_snr(cfg, snr)
    return cfg


def _emit(table: Table, out: str, figure=None) -> None:
    text = table.to_csv()
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)
    if figure is not None:
        figure(table, Path(out).with_suffix(".png"))


def _check_plot_target(out: str, plot: bool) -> None:
    if plot and out == "-":
        raise click.BadParameter("needs --out to name a file", param_hint="--plot")


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(dir_okay=False), help="Game configuration (JSON).")
out_option = click.option("--out", default="-", show_default=True, help="CSV destination; '-' for stdout.")
plot_option = click.option("--plot/--no-plot", default=False, help="Also write a PNG next to the CSV.")


@click.group()
def cli():
    """Power allocation for secrecy in a fading multiple-access wiretap channel."""


@cli.command()
@config_option
@click.option("--snr", type=float, default=None, help="Rescale every budget to this SNR.")
@click.option("--schedule", type=click.Choice(["sequential", "simultaneous"]), default="sequential",
              show_default=True)
@click.option("--max-iterations", type=click.IntRange(min=1), default=None,
              help="Override the configured iteration cap.")
@out_option
@plot_option
def converge(config_path, snr, schedule, max_iterations, out, plot):
    """Per-iteration user rates of the best-response iteration."""
    _check_plot_target(out, plot)
    cfg = _load(config_path, snr)
    table = run_convergence_experiment(cfg, schedule=schedule, max_iterations=max_iterations)
    figure = None
    if plot:
        from .plotting import plot_convergence as figure
    _emit(table, out, figure)
    if not table.ok:
        raise NotConverged(table.comments[-1])


@cli.command()
@config_option
@click.option("--snr-list", default=None, help="Comma-separated SNR values, e.g. 1,2,5.")
@click.option("--snr-range", default=None, help="start:stop:step, stop included, e.g. 1:10:1.")
@click.option("--modes", default=",".join(MODES), show_default=True,
              help=f"Comma-separated subset of {', '.join(MODES)}.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the centralized restarts.")
@click.option("--restarts", type=click.IntRange(min=1), default=5, show_default=True)
@out_option
@plot_option
def sweep(config_path, snr_list, snr_range, modes, seed, restarts, out, plot):
    """Sum rate of each mode (and the price of anarchy) over a range of SNR values."""
    _check_plot_target(out, plot)
    if (snr_list is None) == (snr_range is None):
        raise click.UsageError("give exactly one of --snr-list or --snr-range")
    try:
        values = parse_snr_list(snr_list) if snr_list is not None else parse_snr_range(snr_range)
        spec = SweepSpec(values, parse_modes(modes), seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    cfg = _load(config_path)
    table = run_sweep(cfg, spec, restarts=restarts)
    figure = None
    if plot:
        from .plotting import plot_sweep as figure
    _emit(table, out, figure)
    if not table.ok:
        raise NotConverged("some sweep points did not converge; see the comment rows")


@cli.command()
@config_option
@click.option("--snr", type=float, default=None, help="Rescale every budget to this SNR.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--restarts", type=click.IntRange(min=1), default=5, show_default=True)
def poa(config_path, snr, seed, restarts):
    """Equilibrium, centralized and uniform sum rates and their ratio at one SNR."""
    cfg = _load(config_path, snr)
    rep = price_of_anarchy(cfg, restarts=restarts, seed=seed)
    table = Table(("snr", "sum_rate_uniform", "sum_rate_be", "sum_rate_opt", "poa"))
    table.rows.append((rep.snr, rep.sum_rate_uniform, rep.sum_rate_be, rep.sum_rate_opt, rep.poa))
    table.comments.extend(rep.diagnostics)
    _emit(table, "-")
    if not rep.be_converged:
        raise NotConverged("best-response iteration did not converge")


@cli.command()
@config_option
@click.option("--snr", type=float, default=None, help="Rescale every budget to this SNR.")
@click.option("--samples", type=click.IntRange(min=0), default=100, show_default=True,
              help="Degraded random profiles for the concavity scan.")
@click.option("--trials", type=click.IntRange(min=2), default=10, show_default=True,
              help="Random starts for the uniqueness probe.")
@click.option("--seed", type=int, default=0, show_default=True)
def certify(config_path, snr, samples, trials, seed):
    """Concavity scan of the pseudo-gradient Jacobian and a multi-start uniqueness probe.

    A positive eigenvalue is reported, not treated as an error: the scan is
    a numerical check whose outcome is the result.
    """
    cfg = _load(config_path, snr)
    cert = concavity_certificate(cfg, samples, seed=seed)
    probe = uniqueness_probe(cfg, trials, seed=seed)
    table = Table(("check", "value"))
    table.rows += [
        ("concavity_samples", cert.sample_count),
        ("concavity_resampled", cert.resampled),
        ("concavity_max_eigenvalue", cert.max_eigenvalue),
        ("concavity_passed", str(cert.passed).lower()),
        ("uniqueness_trials", trials),
        ("uniqueness_max_distance", probe.max_distance),
        ("uniqueness_non_converged", len(probe.non_converged)),
    ]
    table.comments.extend(cert.diagnostics)
    if cert.witness is not None:
        flat = " ".join(format_value(v) for v in cert.witness.as_array().reshape(-1))
        table.comments.append(f"witness profile (row-major per user): {flat}")
    _emit(table, "-")
    if not probe.all_converged:
        raise NotConverged(f"{len(probe.non_converged)} of {trials} uniqueness trials did not converge")


def main(argv=None) -> int:
    """Console entry point; maps every usage or input error to exit code 1."""
    try:
        cli.main(args=argv, prog_name="secrecy-game", standalone_mode=False)
    except NotConverged as exc:
        exc.show()
        return EXIT_NOT_CONVERGED
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INVALID
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
