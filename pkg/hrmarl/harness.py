"""Experiment configuration, seeded trials and learning-curve aggregation"""

# SPDX-License-Identifier: BSD-3-Clause

import io
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from os import PathLike
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import click
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .baselines import train_iqrm, train_modular  # noqa: E402
from .diagnostics import InvalidSpecError, error, errors_in  # noqa: E402
from .envs import DomainSpec, domain_spec, make_env  # noqa: E402
from .hierarchy import PropositionHierarchy, validate_coverage  # noqa: E402
from .lang import parse_hierarchy, parse_layout, parse_rm  # noqa: E402
from .learners import LearningConfig, TrainingResult, train_mahrm  # noqa: E402
from .utils import convert, get_handle  # noqa: E402

__all__ = [
    "ALGORITHMS",
    "METRICS_COLUMNS",
    "AggregationError",
    "ExperimentConfig",
    "aggregate",
    "build_config",
    "load_config",
    "plot",
    "read_metrics",
    "run_experiment",
    "run_trial",
    "write_metrics",
]

logger = logging.getLogger(__name__)

ALGORITHMS = ("mahrm", "iqrm", "modular")

METRICS_COLUMNS = ["trial", "train_step", "test_steps"]

_ASSET_KEYS = ("layout", "hierarchy", "team_rm")

_RE_CONFIG = re.compile(
    r"^(?P<key>[A-Za-z_][A-Za-z0-9_]*(?:\.\d+)?)\s*=\s*(?P<value>.*)$"
)
_RE_SUBTASK_KEY = re.compile(r"^subtasks\.(?P<agent>\d+)$")


class AggregationError(ValueError):
    """Raised when trials were evaluated at different training steps."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run and reproduce a batch of trials."""

    domain: str
    algorithm: str = "mahrm"
    learning: LearningConfig = field(default_factory=LearningConfig)
    trials: int = 1
    n_agents: Optional[int] = None
    layout: Optional[Path] = None
    hierarchy: Optional[Path] = None
    team_rm: Optional[Path] = None
    subtasks: Mapping[int, Tuple[str, ...]] = field(default_factory=dict)
    out: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise click.BadParameter(f"Need at least one trial, got {self.trials}.")
        if self.algorithm not in ALGORITHMS:
            raise click.BadParameter(
                f"Unknown algorithm {self.algorithm!r}; expected one of"
                f" {', '.join(ALGORITHMS)}."
            )
        domain_spec(self.domain, self.n_agents)

    @property
    def spec(self) -> DomainSpec:
        return domain_spec(self.domain, self.n_agents)

    def asset(self, key: str) -> Path:
        """Override for ``key`` if configured, else the bundled asset."""
        override = getattr(self, key)
        return Path(override) if override is not None else getattr(self.spec, key)


def load_config(in_data: Union[str, PathLike, TextIO]) -> Dict[str, Any]:
    """Reads ``key = value`` lines into a dictionary of typed values.

    Keys are the :class:`LearningConfig` fields, the asset overrides
    ``layout``, ``hierarchy`` and ``team_rm``, and ``subtasks.<agent>`` with
    comma-separated proposition names.

    :raises click.BadParameter: on malformed lines or unknown keys.

    """
    allowed = set(LearningConfig.field_names()) | set(_ASSET_KEYS)
    values: Dict[str, Any] = {}
    subtasks: Dict[int, Tuple[str, ...]] = {}
    with get_handle(in_data) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            m = _RE_CONFIG.match(text)
            if m is None:
                raise click.BadParameter(f"line {lineno}: expected 'key = value'.")
            key, value = m.group("key"), m.group("value").strip()
            if (sm := _RE_SUBTASK_KEY.match(key)) is not None:
                subtasks[int(sm.group("agent"))] = tuple(
                    v.strip() for v in value.split(",") if v.strip()
                )
            elif key in allowed:
                values[key] = value if key in _ASSET_KEYS else convert(value)
            else:
                raise click.BadParameter(f"line {lineno}: unknown key {key!r}.")
    if subtasks:
        values["subtasks"] = subtasks
    return values


def build_config(
    domain: str,
    algorithm: str = "mahrm",
    values: Optional[Mapping[str, Any]] = None,
    n_agents: Optional[int] = None,
    trials: int = 1,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
) -> ExperimentConfig:
    """Layers domain defaults, config file values and explicit flags."""
    spec = domain_spec(domain, n_agents)
    values = dict(values or {})
    learning: Dict[str, Any] = {
        "gamma": spec.gamma,
        "max_episode_length": spec.cap,
        "train_steps": spec.train_steps,
    }
    for key in LearningConfig.field_names():
        if key in values:
            learning[key] = values.pop(key)
    if seed is not None:
        learning["seed"] = seed
    try:
        learning_cfg = LearningConfig(**learning)
    except (TypeError, ValueError) as exc:
        raise click.BadParameter(str(exc)) from exc
    return ExperimentConfig(
        domain=domain,
        algorithm=algorithm,
        learning=learning_cfg,
        trials=trials,
        n_agents=spec.n_agents,
        layout=_as_path(values.get("layout")),
        hierarchy=_as_path(values.get("hierarchy")),
        team_rm=_as_path(values.get("team_rm")),
        subtasks=values.get("subtasks", {}),
        out=out,
    )


def _as_path(value: Optional[str]) -> Optional[Path]:
    return Path(value) if value else None


def _load_hierarchy(cfg: ExperimentConfig) -> PropositionHierarchy:
    h = parse_hierarchy(cfg.asset("hierarchy"))
    problems = errors_in(validate_coverage(h, cfg.spec.n_agents))
    if problems:
        raise InvalidSpecError(problems)
    return h


def check_assets(cfg: ExperimentConfig) -> None:
    """Loads and validates every asset a run needs before any trial starts.

    :raises InvalidSpecError: when any asset fails validation.

    """
    layout = parse_layout(cfg.asset("layout"))
    if layout.n_agents != cfg.spec.n_agents:
        message = (
            f"layout places {layout.n_agents} agents, {cfg.domain} expects"
            f" {cfg.spec.n_agents}"
        )
        raise InvalidSpecError([error(layout.origin, 1, 1, message, "agent-count")])
    if cfg.algorithm in ("mahrm", "modular"):
        _load_hierarchy(cfg)
    if cfg.algorithm in ("iqrm", "modular"):
        parse_rm(cfg.asset("team_rm"))


def run_trial(cfg: ExperimentConfig, trial: int) -> List[Tuple[int, int, int]]:
    """Runs one trial, seeded with the base seed plus the trial index."""
    learning = cfg.learning.updated(seed=cfg.learning.seed + trial)
    env = make_env(
        cfg.domain,
        cfg.spec.n_agents,
        layout=cfg.asset("layout"),
        cap=learning.max_episode_length,
    )
    logger.info("Trial %d: %s on %s, seed %d", trial, cfg.algorithm, cfg.domain,
                learning.seed)
    result: TrainingResult
    if cfg.algorithm == "mahrm":
        result = train_mahrm(_load_hierarchy(cfg), env, learning)
    elif cfg.algorithm == "iqrm":
        result = train_iqrm(parse_rm(cfg.asset("team_rm")), env, learning)
    else:
        subtasks = dict(cfg.subtasks)
        if not subtasks:
            primitives = _load_hierarchy(cfg).primitives
            subtasks = {i: primitives for i in env.agents}
        result = train_modular(subtasks, parse_rm(cfg.asset("team_rm")), env, learning)
    logger.info("Trial %d finished; last greedy episode took %d steps", trial,
                result.rows[-1][1])
    return [(trial, step, test) for step, test in result.rows]


def metrics_frame(rows: Sequence[Tuple[int, int, int]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=METRICS_COLUMNS).astype("int64")


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> pd.DataFrame:
    """Runs ``cfg.trials`` trials, in up to ``jobs`` worker processes.

    The concatenated metrics are ordered by trial and written to ``cfg.out``
    when it is set.

    """
    check_assets(cfg)
    trials = range(cfg.trials)
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(run_trial, repeat(cfg), trials))
    else:
        batches = [run_trial(cfg, trial) for trial in trials]
    frame = metrics_frame([row for batch in batches for row in batch])
    if cfg.out is not None:
        write_metrics(frame, cfg.out)
    return frame


def write_metrics(frame: pd.DataFrame, out: Union[str, PathLike, TextIO]) -> None:
    with get_handle(out, mode="w") as fh:
        frame.to_csv(fh, columns=METRICS_COLUMNS, index=False, lineterminator="\n")


def read_metrics(in_data: Union[str, PathLike, TextIO]) -> pd.DataFrame:
    """Reads a metrics CSV, checking its header.

    :raises click.BadParameter: when the columns differ from the metrics header.

    """
    with get_handle(in_data) as fh:
        frame = pd.read_csv(fh)
    if list(frame.columns) != METRICS_COLUMNS:
        raise click.BadParameter(
            f"Expected columns {','.join(METRICS_COLUMNS)}, got"
            f" {','.join(map(str, frame.columns))}."
        )
    return frame.astype("int64")


def aggregate(frame: pd.DataFrame) -> pd.DataFrame:
    """Median and 25th/75th percentiles of test steps per training step.

    Percentiles interpolate linearly between order statistics.

    :raises AggregationError: when the frame is empty or trials were evaluated
        at different training steps.

    """
    if frame.empty:
        raise AggregationError("No metrics to aggregate.")
    steps = {
        trial: tuple(sorted(group["train_step"]))
        for trial, group in frame.groupby("trial")
    }
    if len(set(steps.values())) > 1:
        raise AggregationError("Trials were evaluated at different training steps.")
    grouped = frame.groupby("train_step")["test_steps"]
    curve = pd.DataFrame(
        {
            "median": grouped.median(),
            "p25": grouped.quantile(0.25, interpolation="linear"),
            "p75": grouped.quantile(0.75, interpolation="linear"),
        }
    )
    return curve.reset_index()


def plot(curves: Sequence[pd.DataFrame], labels: Sequence[str]) -> str:
    """Renders learning curves as SVG text.

    Each curve is drawn as its median line over a shaded band between the
    25th and 75th percentiles.

    :raises click.UsageError: when no curves are given.

    """
    if not curves:
        raise click.UsageError("Nothing to plot: no learning curves given.")
    if len(labels) != len(curves):
        raise click.UsageError(f"Got {len(curves)} curves but {len(labels)} labels.")
    plt.rcParams["svg.hashsalt"] = "hrmarl"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for curve, label in zip(curves, labels):
            (line,) = ax.plot(curve["train_step"], curve["median"], label=label)
            ax.fill_between(
                curve["train_step"],
                curve["p25"],
                curve["p75"],
                color=line.get_color(),
                alpha=0.25,
                linewidth=0,
            )
        ax.set_xlabel("training steps")
        ax.set_ylabel("test steps")
        ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return buf.getvalue()
