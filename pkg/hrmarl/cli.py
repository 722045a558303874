"""Main entry point for command line invocation"""

# SPDX-License-Identifier: BSD-3-Clause

import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, TextIO, Tuple, cast

import click

from . import __version__
from .diagnostics import Diagnostic, InvalidSpecError, errors_in
from .envs import DOMAINS, domain_spec, make_env, oracle_steps
from .harness import (
    ALGORITHMS,
    AggregationError,
    aggregate,
    build_config,
    load_config,
    plot as render_plot,
    read_metrics,
    run_experiment,
    write_metrics,
)
from .hierarchy import validate_coverage
from .lang import (
    CycleError,
    count_accepting_paths,
    parse_hierarchy,
    parse_layout,
    parse_rm,
)
from .utils import write_output

_DOMAIN_NAMES = sorted({name for name, _ in DOMAINS})
_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


class ExitCodeGroup(click.Group):
    """Click group exiting with 1 on usage errors and 2 on invalid assets."""

    def main(self, *args: Any, standalone_mode: bool = True, **kwargs: Any) -> Any:
        if not standalone_mode:
            return super().main(*args, standalone_mode=False, **kwargs)
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as exc:
            exc.show()
            sys.exit(1)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.group(cls=ExitCodeGroup)
@click.version_option(__version__, message="%(version)s")
@click.option(
    "--fmt",
    default="json",
    type=click.Choice(["json", "yaml"]),
    help="Output file format. Default: json.",
)
@click.option(
    "--indent",
    default=2,
    help="Indentation level. Ignored if the --compact flag is set. Default: 2.",
)
@click.option(
    "--compact",
    is_flag=True,
    help="Whether to create a compact JSON or not. Ignored if output format is"
    " YAML.",
)
@click.option(
    "--log-level",
    default="WARNING",
    type=click.Choice(_LOG_LEVELS, case_sensitive=False),
    help="Logging level for messages on stderr. Default: WARNING.",
)
@click.pass_context
def main(
    ctx: click.Context, fmt: str, indent: int, compact: bool, log_level: str
) -> None:
    """Multi-agent reinforcement learning with hierarchies of reward machines."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    ctx.params["fmt"] = fmt
    ctx.params["indent"] = indent
    ctx.params["compact"] = compact


def _domain_options(fn: Any) -> Any:
    fn = click.option(
        "--agents",
        "n_agents",
        type=int,
        default=None,
        help="Number of agents; selects among the bundled settings of the domain.",
    )(fn)
    return click.option(
        "--domain",
        required=True,
        type=click.Choice(_DOMAIN_NAMES),
        help="Benchmark domain.",
    )(fn)


@main.command()
@_domain_options
@click.option(
    "--algo",
    "algorithm",
    default="mahrm",
    type=click.Choice(ALGORITHMS),
    help="Learning algorithm. Default: mahrm.",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="File of 'key = value' lines overriding the domain defaults.",
)
@click.option("--trials", default=1, type=int, help="Number of trials. Default: 1.")
@click.option("--seed", default=None, type=int, help="Base seed of the first trial.")
@click.option(
    "--jobs", default=1, type=int, help="Trials run in parallel. Default: 1."
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Metrics CSV path. Default: stdout.",
)
def train(
    domain: str,
    n_agents: Optional[int],
    algorithm: str,
    config_path: Optional[Path],
    trials: int,
    seed: Optional[int],
    jobs: int,
    out: Optional[Path],
) -> None:
    """Trains agents and writes a trial,train_step,test_steps CSV."""
    values = load_config(config_path) if config_path is not None else {}
    cfg = build_config(
        domain,
        algorithm,
        values,
        n_agents=n_agents,
        trials=trials,
        seed=seed,
        out=out,
    )
    frame = run_experiment(cfg, jobs=max(1, jobs))
    if out is None:
        write_metrics(frame, click.get_text_stream("stdout"))


def _curve(path: Path) -> Any:
    try:
        return aggregate(read_metrics(path))
    except AggregationError as exc:
        raise click.BadParameter(f"{path}: {exc}") from exc


@main.command()
@click.argument(
    "csvs", nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--label",
    "labels",
    multiple=True,
    help="Series label, once per CSV. Default: the CSV file name.",
)
@click.option("--out", "output", type=click.File("w"), default="-")
def plot(csvs: Tuple[Path, ...], labels: Tuple[str, ...], output: TextIO) -> None:
    """Plots median learning curves with 25-75% bands as SVG."""
    if not csvs:
        raise click.UsageError("Nothing to plot: give at least one metrics CSV.")
    curves = [_curve(path) for path in csvs]
    output.write(render_plot(curves, list(labels) or [path.stem for path in csvs]))


def _diagnose(path: Path) -> List[Diagnostic]:
    found: List[Diagnostic] = []
    try:
        if path.suffix == ".rm":
            parse_rm(path, found)
        elif path.suffix == ".hier":
            h = parse_hierarchy(path, diagnostics=found)
            found.extend(validate_coverage(h, h.n_agents))
        elif path.suffix == ".layout":
            parse_layout(path, found)
        else:
            raise click.BadParameter(
                f"Cannot tell the format of {path}; expected .rm, .hier or .layout."
            )
    except InvalidSpecError as exc:
        found.extend(exc.diagnostics)
    return found


@main.command()
@click.argument(
    "paths",
    nargs=-1,
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.pass_context
def validate(ctx: click.Context, paths: Sequence[Path]) -> None:
    """Checks reward machine, hierarchy and layout files.

    Prints one diagnostic per line and exits with 2 if any error is found.

    """
    failed = False
    for path in paths:
        diagnostics = _diagnose(path)
        for diagnostic in diagnostics:
            click.echo(str(diagnostic))
        failed = failed or bool(errors_in(diagnostics))
    if failed:
        ctx.exit(2)


@main.command()
@_domain_options
@click.option(
    "--layout",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Layout file replacing the bundled one.",
)
@click.option(
    "--team-rm",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Flat team reward machine replacing the bundled one.",
)
@click.argument("output", type=click.File("w"), default="-")
@click.pass_context
def oracle(
    ctx: click.Context,
    domain: str,
    n_agents: Optional[int],
    layout: Optional[Path],
    team_rm: Optional[Path],
    output: TextIO,
) -> None:
    """Prints the fewest steps that complete the joint task."""
    spec = domain_spec(domain, n_agents)
    env = make_env(domain, spec.n_agents, layout=layout)
    steps = oracle_steps(env, parse_rm(team_rm or spec.team_rm))
    payload = {"domain": domain, "agents": env.n_agents, "steps": steps}
    parent = cast(click.Context, ctx.parent)
    write_output(payload, output, **parent.params)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("output", type=click.File("w"), default="-")
@click.pass_context
def summarize(ctx: click.Context, input: Path, output: TextIO) -> None:
    """Aggregates a metrics CSV into median and 25/75% percentiles per step."""
    curve = _curve(input)
    payload = [
        {
            "train_step": int(row.train_step),
            "median": float(row.median),
            "p25": float(row.p25),
            "p75": float(row.p75),
        }
        for row in curve.itertuples(index=False)
    ]
    parent = cast(click.Context, ctx.parent)
    write_output(payload, output, **parent.params)


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("output", type=click.File("w"), default="-")
@click.pass_context
def inspect(ctx: click.Context, input: Path, output: TextIO) -> None:
    """Summarises the structure of a reward machine file."""
    rm = parse_rm(input)
    try:
        paths: Optional[int] = count_accepting_paths(rm)
    except CycleError:
        paths = None
    payload = {
        "name": rm.name,
        "params": list(rm.formal_params),
        "states": len(rm.states),
        "initial": rm.initial,
        "terminals": sorted(rm.terminals),
        "transitions": len(rm.transitions),
        "accepting_paths": paths,
    }
    parent = cast(click.Context, ctx.parent)
    write_output(payload, output, **parent.params)
