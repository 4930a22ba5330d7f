"""CLI interface for addtwist experiments and verification suites."""

import functools
import json
import sys

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from addtwist.averages import LIMIT_TOL, convergence_experiment, convergence_report, limit_series
from addtwist.characters import character_sums_report
from addtwist.config import (
    DEFAULT_FORM,
    RunConfig,
    Settings,
    configure_logging,
    parse_float_list,
    parse_int_list,
)
from addtwist.errors import AddTwistError, DataError
from addtwist.expsums import weil_bound_report
from addtwist.forms import CoefficientSeries, SeriesSource, verify_hecke
from addtwist.ltwist import SymbolTable, fe_sweep, modsym_bound_report, symbol_rows
from addtwist.report import Report
from addtwist.twists import apply_atkin_lehner_numeric

INTEGRITY_TERMS = 1000


def handle_errors(command):
    """Turn library errors into ``Error: ...`` on stderr and exit status 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except AddTwistError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(2)

    return wrapper


def build_config(**kwargs) -> RunConfig:
    """RunConfig from the given options, with tolerance and workers defaulting to Settings."""
    try:
        settings = Settings.from_env()
        values = {"tol": settings.tol, "jobs": settings.jobs}
        values.update({k: v for k, v in kwargs.items() if v is not None})
        return RunConfig(**values)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise click.UsageError(messages) from None


def emit(report: Report, config: RunConfig):
    """Write the report to --out or stdout."""
    if config.out:
        report.save(str(config.out), config.fmt)
        click.echo(f"Wrote {len(report)} rows to {config.out}", err=True)
    elif config.fmt == "json":
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.to_csv(), nl=False)


def check_integrity(f: SeriesSource):
    """Raise DataError naming the Hecke relations a coefficient source violates."""
    n = f.length if isinstance(f, CoefficientSeries) else INTEGRITY_TERMS
    hecke = verify_hecke(f.series(min(n, INTEGRITY_TERMS)))
    if not hecke.ok:
        raise DataError(f"Hecke check failed for {f.label}: {', '.join(hecke.failed_relations())}")


form_option = click.option(
    "--form",
    "-f",
    default=DEFAULT_FORM,
    show_default=True,
    help="Form source: eta:<m^e,...@level>, file:<path> or bundled:<11a|27a|27a_chi3>",
)
out_option = click.option("--out", "-o", type=click.Path(dir_okay=False), help="Output file (stdout when omitted)")
format_option = click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True, help="Output format"
)


@click.group()
@click.option("--log-level", envvar="ADDTWIST_LOG_LEVEL", default=None, help="Logging level (default WARNING)")
def cli(log_level):
    """addtwist - additively twisted L-functions and modular symbols of newforms."""
    load_dotenv()
    configure_logging(log_level or Settings.from_env().log_level)


@cli.command("verify-fe")
@form_option
@click.option("--d-max", type=int, default=12, show_default=True, help="Largest denominator d")
@click.option("--s-list", default="0.7,1.0,1.3", show_default=True, help="Comma-separated real points s")
@click.option("--tol", type=float, help="Tolerance (default ADDTWIST_TOL or 1e-6)")
@click.option("--jobs", "-j", type=int, help="Worker processes (default ADDTWIST_JOBS or 1)")
@out_option
@format_option
@handle_errors
def verify_fe(form, d_max, s_list, tol, jobs, out, fmt):
    """Compare both sides of the functional equation for every reduced a/d."""
    config = build_config(
        form=form, d_max=d_max, s_list=parse_float_list(s_list), tol=tol, jobs=jobs, out=out, fmt=fmt
    )
    f = config.source()
    check_integrity(f)
    report = fe_sweep(f, config.d_max, config.s_list, config.tol, config.jobs)
    emit(report, config)
    failures = report.get_metadata("failures", 0)
    if failures:
        click.echo(
            f"Error: {failures} of {len(report)} rows exceed tolerance {config.tol:g} "
            f"(worst {report.get_metadata('max_abs_diff'):.3e})",
            err=True,
        )
        sys.exit(1)


@cli.command()
@form_option
@click.option("--d-max", type=int, default=20, show_default=True, help="Largest denominator d")
@click.option("--bounds-out", type=click.Path(dir_okay=False), help="Also save the bound-ratio report here")
@out_option
@format_option
@handle_errors
def modsym(form, d_max, bounds_out, out, fmt):
    """Tabulate modular symbols <a/d>^+- for every reduced a/d."""
    config = build_config(form=form, d_max=d_max, out=out, fmt=fmt)
    f = config.source()
    table = SymbolTable(f)
    emit(symbol_rows(f, config.d_max, table), config)
    bounds = modsym_bound_report(f, config.d_max, table)
    if bounds_out:
        bounds.save(bounds_out, config.fmt)
    click.echo(f"max |Lambda| / shape ratio: {bounds.get_metadata('max_ratio'):.4g}", err=True)


@cli.command()
@form_option
@click.option("--x", "x", required=True, help="Endpoint x in [0, 1], as p/q or decimal")
@click.option("--M", "M", type=int, help="Single modulus M")
@click.option("--M-list", "M_list", help="Comma-separated ascending moduli")
@click.option(
    "--limit-tol", type=float, help=f"Certified tail tolerance of the limit series (default {LIMIT_TOL:g})"
)
@click.option("--limit-terms", type=int, help="Explicit length of the limit series, overriding --limit-tol")
@out_option
@format_option
@handle_errors
def converge(form, x, M, M_list, limit_tol, limit_terms, out, fmt):
    """Compare G_M^+-(x) with the limit series along a list of moduli."""
    config = build_config(
        form=form,
        x=x,
        M=M,
        M_list=None if M_list is None else parse_int_list(M_list),
        limit_tol=limit_tol,
        limit_terms=limit_terms,
        out=out,
        fmt=fmt,
    )
    f = config.source()
    moduli = config.moduli()
    limit = limit_series(f, config.x, config.limit_terms, config.limit_tol)
    rows = convergence_experiment(f, config.x, moduli, limit=limit)
    emit(convergence_report(f, config.x, rows, limit), config)


@cli.command()
@click.option("--r-max", type=int, default=100, show_default=True, help="Largest character modulus")
@click.option(
    "--closed-max", type=int, default=60, show_default=True, help="Largest modulus for the closed-form Gauss sum check"
)
@click.option("--c-max", type=int, default=300, show_default=True, help="Largest Kloosterman modulus")
@click.option("--mn-max", type=int, default=20, show_default=True, help="Largest Kloosterman argument")
@click.option("--tol", type=float, default=1e-9, show_default=True, help="Tolerance")
@out_option
@format_option
@handle_errors
def sums(r_max, closed_max, c_max, mn_max, tol, out, fmt):
    """Check Gauss sums, generalized Gauss sums and the Weil bound."""
    config = build_config(tol=tol, out=out, fmt=fmt)
    characters = character_sums_report(r_max, closed_max=min(closed_max, r_max))
    weil = weil_bound_report(mn_max, mn_max, c_max)
    report = Report(
        name="sums",
        columns=["check", "cases", "worst", "tolerance", "passed"],
        metadata={"r_max": r_max, "closed_max": closed_max, "c_max": c_max, "mn_max": mn_max},
    )
    for check in ("gauss_dev", "closed_form_dev", "orthogonality"):
        worst = characters.get_metadata(f"max_{check}")
        report.add_row([check, len(characters), worst, config.tol, bool(worst <= config.tol)])
    worst = weil.get_metadata("max_ratio")
    report.add_row(["weil_ratio", len(weil), worst, 1 + config.tol, bool(worst <= 1 + config.tol)])
    emit(report, config)
    if not all(report.column("passed")):
        sys.exit(1)


@cli.command()
@form_option
@click.option("--N", "N", type=int, default=10_000, show_default=True, help="Number of coefficients to check")
@out_option
@format_option
@handle_errors
def hecke(form, N, out, fmt):
    """Check Hecke relations and the Deligne bound."""
    config = build_config(form=form, out=out, fmt=fmt)
    f = config.source()
    result = verify_hecke(f.series(N))
    report = Report(
        name="hecke",
        columns=["relation", "passed", "failed", "first_failure"],
        metadata={"form": f.label, "level": f.level, "N": N},
    )
    for name, check in result.checks.items():
        report.add_row([name, check.passed, check.failed, str(check.first_failure or "")])
    emit(report, config)
    if not result.ok:
        click.echo(f"Error: {f.label} fails {', '.join(result.failed_relations())}", err=True)
        sys.exit(1)


@cli.command()
@form_option
@click.option("--R", "R", type=int, required=True, help="Exact divisor R of the level")
@click.option("--M-out", "M_out", type=int, default=20, show_default=True, help="Coefficients to compute")
@click.option("--tol", type=float, help="Tolerance (default ADDTWIST_TOL or 1e-6)")
@out_option
@format_option
@handle_errors
def al(form, R, M_out, tol, out, fmt):
    """Apply the Atkin-Lehner operator W_R numerically and compare with the input coefficients."""
    config = build_config(form=form, tol=tol, out=out, fmt=fmt)
    f = config.source()
    result = apply_atkin_lehner_numeric(f, R, M_out, tol=config.tol)
    a = f.series(M_out).a
    report = Report(
        name="atkin-lehner",
        columns=["m", "a", "b_re", "b_im", "error", "ratio_re", "ratio_im"],
        metadata={"form": f.label, "level": f.level, "R": R, **result.metadata},
    )
    for m in range(1, M_out + 1):
        b = complex(result.b[m])
        ratio = b / complex(a[m]) if a[m] != 0 else complex("nan")
        report.add_row([m, a[m], b.real, b.imag, float(result.errors[m]), ratio.real, ratio.imag])
    lam = complex(result.b[1])
    report.set_metadata("pseudo_eigenvalue", lam)
    emit(report, config)
    click.echo(f"b(1) = {lam.real:.10f} {lam.imag:+.10f}i", err=True)


@cli.command()
def version():
    """Show version information."""
    from addtwist import __version__

    click.echo(f"addtwist version {__version__}")


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
