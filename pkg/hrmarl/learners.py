"""Tabular learners: QRM and the recursive hierarchical learner"""

# SPDX-License-Identifier: BSD-3-Clause

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import (
    Any,
    Callable,
    Dict,
    Hashable,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Protocol,
    Sequence,
    Tuple,
)

import numpy as np
from numpy.random import Generator, default_rng

from .diagnostics import InvalidSpecError, errors_in
from .envs import ACTIONS, GridWorld, JointAction, JointState
from .hierarchy import (
    LevelRuntime,
    PropositionHierarchy,
    SubtaskOption,
    option_space,
    validate_coverage,
)
from .machine import (
    EMPTY_LABEL,
    Label,
    RewardMachine,
    RmInstance,
    primitive_machine,
    rm_step,
    transition,
)

__all__ = [
    "EmptyOptionSpaceError",
    "EpisodeClock",
    "EpisodeContext",
    "EpisodeResult",
    "Experience",
    "LearningConfig",
    "LevelReturn",
    "LevelTrace",
    "MahrmLearner",
    "QStore",
    "TrainingResult",
    "accumulate_return",
    "option_update",
    "qrm_update",
    "select_action",
    "select_option",
    "train",
    "train_mahrm",
]

logger = logging.getLogger(__name__)


class EmptyOptionSpaceError(RuntimeError):
    """Raised when an option has to be chosen from an empty set."""


@dataclass(frozen=True)
class LearningConfig:
    """Hyperparameters shared by every learner."""

    alpha: float = 0.1
    epsilon: float = 0.1
    gamma: float = 0.9
    max_option_length: int = 50
    max_episode_length: int = 500
    train_steps: int = 300_000
    eval_period: int = 1000
    seed: int = 0
    eval_seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}.")
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}.")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}.")
        for name in ("max_option_length", "max_episode_length", "eval_period"):
            if getattr(self, name) < 1:
                raise ValueError(
                    f"{name} must be positive, got {getattr(self, name)}."
                )
        if self.train_steps < 0:
            raise ValueError(
                f"train_steps must not be negative, got {self.train_steps}."
            )

    @classmethod
    def field_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def updated(self, **values: Any) -> "LearningConfig":
        return replace(self, **values)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


# (proposition, binding, machine state)
OptionKey = Tuple[str, Tuple[int, ...], Hashable]


class QStore:
    """Value tables with zero defaults.

    Primitive tables map ``(proposition, machine state, local state)`` to one
    value per action. Option tables map ``(proposition, binding, machine
    state)`` to values per :class:`SubtaskOption`. Reads never create entries.

    """

    def __init__(self, n_actions: int = len(ACTIONS)) -> None:
        self.n_actions = n_actions
        self.primitive: Dict[Tuple[str, Hashable, Hashable], np.ndarray] = {}
        self.options: Dict[OptionKey, Dict[Any, float]] = {}
        self._zeros = np.zeros(n_actions)
        self._zeros.setflags(write=False)

    def actions(self, prop: str, u: Hashable, s: Hashable) -> np.ndarray:
        return self.primitive.get((prop, u, s), self._zeros)

    def action_row(self, prop: str, u: Hashable, s: Hashable) -> np.ndarray:
        key = (prop, u, s)
        if key not in self.primitive:
            self.primitive[key] = np.zeros(self.n_actions)
        return self.primitive[key]

    def option_value(
        self, prop: str, binding: Tuple[int, ...], u: Hashable, option: Any
    ) -> float:
        return self.options.get((prop, binding, u), {}).get(option, 0.0)

    def option_values(
        self, prop: str, binding: Tuple[int, ...], u: Hashable, options: Sequence[Any]
    ) -> np.ndarray:
        table = self.options.get((prop, binding, u), {})
        return np.fromiter(
            (table.get(o, 0.0) for o in options), dtype=float, count=len(options)
        )

    def set_option_value(
        self,
        prop: str,
        binding: Tuple[int, ...],
        u: Hashable,
        option: Any,
        value: float,
    ) -> None:
        self.options.setdefault((prop, binding, u), {})[option] = value

    def __len__(self) -> int:
        return len(self.primitive) + sum(len(t) for t in self.options.values())


class Experience(NamedTuple):
    """One environment step seen through every agent's local state."""

    local: Tuple[Hashable, ...]
    action: JointAction
    next_local: Tuple[Hashable, ...]


# (machine, binding, acting agent) triples whose tables a step updates.
Scope = Iterable[Tuple[RewardMachine, Tuple[int, ...], int]]


def qrm_update(
    q: QStore, scope: Scope, experience: Experience, label: Label, cfg: LearningConfig
) -> None:
    """Q-learning for reward machines.

    Every non-terminal state ``u`` of every machine in scope is updated from
    the same experience, with the machine's own reward and successor state.
    A terminal successor contributes no future value.

    """
    for rm, binding, agent in scope:
        s = experience.local[agent - 1]
        a = experience.action[agent - 1]
        s2 = experience.next_local[agent - 1]
        for u in rm.states:
            if rm.is_terminal(u):
                continue
            u2, reward = transition(rm, binding, u, label)
            future = 0.0
            if not rm.is_terminal(u2):
                future = float(q.actions(rm.name, u2, s2).max())
            row = q.action_row(rm.name, u, s)
            row[a] += cfg.alpha * (reward + cfg.gamma * future - row[a])


def option_update(
    q: QStore,
    prop: str,
    binding: Tuple[int, ...],
    u_old: Hashable,
    option: Any,
    ret: float,
    tau: int,
    u_new: Hashable,
    next_options: Sequence[Any],
    cfg: LearningConfig,
) -> float:
    """Multi-step Q-learning for an option that ran ``tau`` steps.

    ``next_options`` is the option space at ``u_new``; when empty the target
    reduces to the collected return. Returns the updated value.

    """
    if tau < 1:
        raise ValueError(f"Options run for at least one step, got tau={tau}.")
    future = 0.0
    if next_options:
        future = float(q.option_values(prop, binding, u_new, next_options).max())
    old = q.option_value(prop, binding, u_old, option)
    value = old + cfg.alpha * (ret + cfg.gamma**tau * future - old)
    q.set_option_value(prop, binding, u_old, option, value)
    return value


def accumulate_return(total: float, tau: int, reward: float, gamma: float) -> float:
    """Adds a reward seen ``tau`` steps into an option to its discounted return."""
    if tau < 0:
        raise ValueError(f"Negative option step {tau}.")
    return total + gamma**tau * reward


def _greedy_index(values: np.ndarray, rng: Generator) -> int:
    best = np.flatnonzero(values == values.max())
    return int(best[0]) if len(best) == 1 else int(rng.choice(best))


def select_action(values: np.ndarray, epsilon: float, rng: Generator) -> int:
    """Epsilon-greedy action with uniform tie-breaking."""
    if rng.random() < epsilon:
        return int(rng.integers(len(values)))
    return _greedy_index(values, rng)


def select_option(
    q: QStore,
    prop: str,
    binding: Tuple[int, ...],
    u: Hashable,
    options: Sequence[Any],
    epsilon: float,
    rng: Generator,
) -> Any:
    """Epsilon-greedy choice over ``options`` with uniform tie-breaking."""
    if not options:
        raise EmptyOptionSpaceError(f"No option available for {prop} at state {u!r}.")
    if rng.random() < epsilon:
        return options[int(rng.integers(len(options)))]
    return options[_greedy_index(q.option_values(prop, binding, u, options), rng)]


@dataclass
class EpisodeClock:
    """Environment steps and per-level option steps; ``tau[k - 1]`` is level k."""

    t: int = 0
    tau: List[int] = field(default_factory=list)

    @classmethod
    def for_depth(cls, depth: int) -> "EpisodeClock":
        return cls(0, [0] * depth)

    def tick(self) -> None:
        self.t += 1
        self.tau = [x + 1 for x in self.tau]

    def restart(self, level: int) -> None:
        self.tau[level - 1] = 0


class LevelReturn(NamedTuple):
    """Discounted returns for the caller's instances and the child label."""

    returns: Tuple[float, ...]
    label: Label
    steps: int


class LevelTrace(NamedTuple):
    """Record of one finished level call, kept when tracing is requested."""

    level: int
    start: int
    end: int
    option: SubtaskOption
    parent_states: Tuple[str, ...]
    returns: Tuple[float, ...]
    label: Label


class EpisodeResult(NamedTuple):
    steps: int
    solved: bool
    labels: Tuple[Label, ...] = ()
    trace: Tuple[LevelTrace, ...] = ()


@dataclass
class EpisodeContext:
    """Mutable state of one running episode."""

    env: GridWorld
    state: JointState
    clock: EpisodeClock
    rng: Generator
    epsilon: float
    learn: bool
    on_step: Optional[Callable[[], bool]] = None
    record: bool = False
    solved: bool = False
    halted: bool = False
    labels: List[Label] = field(default_factory=list)
    trace: List[LevelTrace] = field(default_factory=list)

    @classmethod
    def begin(
        cls,
        env: GridWorld,
        rng: Generator,
        epsilon: float,
        learn: bool = True,
        on_step: Optional[Callable[[], bool]] = None,
        record: bool = False,
        depth: int = 1,
    ) -> "EpisodeContext":
        """Resets ``env`` and starts a new episode on it."""
        return cls(
            env,
            env.reset(),
            EpisodeClock.for_depth(depth),
            rng,
            epsilon,
            learn,
            on_step,
            record,
        )

    @property
    def done(self) -> bool:
        return self.solved or self.halted or self.env.t >= self.env.cap

    def advance(self, action: JointAction) -> Tuple[JointState, JointState, Label]:
        state = self.state
        self.state, label = self.env.step(state, action)
        self.clock.tick()
        if self.record:
            self.labels.append(label)
        if self.on_step is not None and not self.on_step():
            self.halted = True
        return state, self.state, label

    def result(self) -> EpisodeResult:
        return EpisodeResult(
            self.env.t, self.solved, tuple(self.labels), tuple(self.trace)
        )


class Learner(Protocol):
    def run_episode(
        self,
        env: GridWorld,
        rng: Generator,
        epsilon: float,
        learn: bool = True,
        on_step: Optional[Callable[[], bool]] = None,
    ) -> EpisodeResult:
        ...


class MahrmLearner:
    """Recursive learner over a hierarchy of reward machines.

    Each call of :meth:`mahrm_at_level` runs one option of level ``k``. At the
    primitive level agents act greedily with respect to their propositions'
    tables; above it every running machine instance picks a child option from
    its option space and the call recurses. A call returns when the episode
    ends, when its option steps reach ``max_option_length`` (below the top
    level), or when one of its instances reaches a terminal state.

    """

    def __init__(
        self,
        hierarchy: PropositionHierarchy,
        cfg: LearningConfig,
        q: Optional[QStore] = None,
    ) -> None:
        problems = errors_in(validate_coverage(hierarchy, hierarchy.n_agents))
        if problems:
            raise InvalidSpecError(problems)
        self.h = hierarchy
        self.cfg = cfg
        self.q = q if q is not None else QStore()
        agents = range(1, hierarchy.n_agents + 1)
        self.scope = [
            (primitive_machine(hierarchy.props[p]), (i,), i)
            for p in hierarchy.primitives
            for i in agents
        ]

    def run_episode(
        self,
        env: GridWorld,
        rng: Generator,
        epsilon: float,
        learn: bool = True,
        on_step: Optional[Callable[[], bool]] = None,
        record: bool = False,
    ) -> EpisodeResult:
        ep = EpisodeContext.begin(
            env, rng, epsilon, learn, on_step, record, depth=self.h.depth
        )
        top = LevelRuntime.start(self.h, self.h.depth, self.h.top_option())
        self.mahrm_at_level(ep, self.h.depth, top, [])
        return ep.result()

    def mahrm_at_level(
        self,
        ep: EpisodeContext,
        k: int,
        runtime: LevelRuntime,
        parents: Sequence[RmInstance],
    ) -> LevelReturn:
        """Runs the option held by ``runtime`` at level ``k``.

        ``parents`` are the caller's running instances; the returned vector
        holds their discounted rewards over this call.

        """
        depth, cfg = self.h.depth, self.cfg
        start = ep.env.t
        parent_states = tuple(inst.current for inst in parents)
        returns = [0.0] * len(parents)
        ep.clock.restart(k)
        label: Label = EMPTY_LABEL
        while not ep.done:
            if k < depth and ep.clock.tau[k - 1] >= cfg.max_option_length:
                break
            if k == 1:
                self._act(ep, runtime)
            else:
                self._delegate(ep, k, runtime)
            label = runtime.terminated
            tau = ep.clock.tau[k - 1]
            for j, inst in enumerate(parents):
                returns[j] = accumulate_return(
                    returns[j], tau - 1, inst.peek(label)[1], cfg.gamma
                )
            if label:
                if k == depth:
                    ep.solved = True
                break
        if ep.record:
            ep.trace.append(
                LevelTrace(
                    k,
                    start,
                    ep.env.t,
                    runtime.option,
                    parent_states,
                    tuple(returns),
                    label,
                )
            )
        return LevelReturn(tuple(returns), label, ep.clock.tau[k - 1])

    def _act(self, ep: EpisodeContext, runtime: LevelRuntime) -> None:
        env, state = ep.env, ep.state
        local = tuple(env.local_state(state, i) for i in env.agents)
        by_agent = {inst.binding[0]: inst for inst in runtime.instances}
        action = tuple(
            select_action(
                self.q.actions(by_agent[i].prop, by_agent[i].current, local[i - 1]),
                ep.epsilon,
                ep.rng,
            )
            for i in env.agents
        )
        _, nxt, label = ep.advance(action)
        if ep.learn:
            next_local = tuple(env.local_state(nxt, i) for i in env.agents)
            qrm_update(self.q, self.scope, Experience(local, action, next_local),
                       label, self.cfg)
        for inst in runtime.instances:
            if not inst.is_terminal:
                rm_step(inst, label)

    def _delegate(self, ep: EpisodeContext, k: int, runtime: LevelRuntime) -> None:
        chosen = []
        for inst in runtime.instances:
            options = option_space(self.h, inst.prop, inst.binding, inst.current)
            chosen.append(
                select_option(self.q, inst.prop, inst.binding, inst.current,
                              options, ep.epsilon, ep.rng)
            )
        child = LevelRuntime.start(
            self.h, k - 1, SubtaskOption.of(p for o in chosen for p in o.parts)
        )
        before = [inst.current for inst in runtime.instances]
        ret = self.mahrm_at_level(ep, k - 1, child, runtime.instances)
        for j, inst in enumerate(runtime.instances):
            rm_step(inst, ret.label)
            if ep.learn and ret.steps > 0:
                option_update(
                    self.q,
                    inst.prop,
                    inst.binding,
                    before[j],
                    chosen[j],
                    ret.returns[j],
                    ret.steps,
                    inst.current,
                    option_space(self.h, inst.prop, inst.binding, inst.current),
                    self.cfg,
                )


class TrainingResult(NamedTuple):
    """Learned tables and ``(train_step, test_steps)`` evaluation rows."""

    learner: Any
    rows: List[Tuple[int, int]]


def evaluate(learner: Learner, env: GridWorld, cfg: LearningConfig) -> int:
    """Steps of one greedy episode, or the episode cap when unsolved."""
    result = learner.run_episode(env, default_rng(cfg.eval_seed), 0.0, learn=False)
    return result.steps if result.solved else env.cap


def train(
    learner: Learner,
    env: GridWorld,
    cfg: LearningConfig,
    eval_env: Optional[GridWorld] = None,
) -> TrainingResult:
    """Trains for ``cfg.train_steps`` environment steps.

    A greedy evaluation runs before training and after every
    ``cfg.eval_period`` training steps, on its own environment copy.

    """
    if eval_env is None:
        eval_env = type(env)(env.layout, cap=env.cap)
    rng = default_rng(cfg.seed)
    rows = [(0, evaluate(learner, eval_env, cfg))]
    steps = 0

    def on_step() -> bool:
        nonlocal steps
        steps += 1
        if steps % cfg.eval_period == 0:
            rows.append((steps, evaluate(learner, eval_env, cfg)))
            logger.debug("Step %d: greedy episode took %d steps", *rows[-1])
        return steps < cfg.train_steps

    episodes = 0
    while steps < cfg.train_steps:
        learner.run_episode(env, rng, cfg.epsilon, learn=True, on_step=on_step)
        episodes += 1
    logger.info("Trained for %d steps over %d episodes", steps, episodes)
    return TrainingResult(learner, rows)


def train_mahrm(
    hierarchy: PropositionHierarchy, env: GridWorld, cfg: LearningConfig
) -> TrainingResult:
    return train(MahrmLearner(hierarchy, cfg), env, cfg)
