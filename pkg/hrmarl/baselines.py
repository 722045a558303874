"""Flat baselines: independent QRM over a team machine, and a modular meta policy"""

# SPDX-License-Identifier: BSD-3-Clause

import logging
from itertools import product
from typing import Callable, Hashable, List, Mapping, Optional, Sequence, Tuple

from numpy.random import Generator

from .envs import GridWorld
from .hierarchy import PartitionError, SubtaskOption
from .learners import (
    EpisodeContext,
    EpisodeResult,
    Experience,
    LearningConfig,
    QStore,
    TrainingResult,
    accumulate_return,
    option_update,
    qrm_update,
    select_action,
    select_option,
    train,
)
from .machine import BoundProp, Label, RewardMachine, RmInstance, rm_step

__all__ = [
    "IqrmLearner",
    "ModularLearner",
    "local_label",
    "subtask_reward",
    "train_iqrm",
    "train_modular",
]

logger = logging.getLogger(__name__)

META = "meta"


class IqrmLearner:
    """Each agent runs QRM on its local state and the shared team machine state.

    The team machine advances on the global label and every agent receives
    its reward.

    """

    def __init__(self, team_rm: RewardMachine, n_agents: int, cfg: LearningConfig):
        self.team_rm = team_rm
        self.cfg = cfg
        self.binding = tuple(range(1, n_agents + 1))
        RmInstance(team_rm, self.binding)
        self.tables = [QStore() for _ in self.binding]

    def run_episode(
        self,
        env: GridWorld,
        rng: Generator,
        epsilon: float,
        learn: bool = True,
        on_step: Optional[Callable[[], bool]] = None,
        record: bool = False,
    ) -> EpisodeResult:
        ep = EpisodeContext.begin(env, rng, epsilon, learn, on_step, record)
        team = RmInstance(self.team_rm, self.binding)
        agents = env.agents
        while not ep.done:
            local = tuple(env.local_state(ep.state, i) for i in agents)
            action = tuple(
                select_action(
                    self.tables[i - 1].actions(self.team_rm.name, team.current,
                                               local[i - 1]),
                    epsilon,
                    rng,
                )
                for i in agents
            )
            _, nxt, label = ep.advance(action)
            if learn:
                experience = Experience(
                    local, action, tuple(env.local_state(nxt, i) for i in agents)
                )
                for i in agents:
                    qrm_update(self.tables[i - 1], [(self.team_rm, self.binding, i)],
                               experience, label, self.cfg)
            rm_step(team, label)
            if team.is_terminal:
                ep.solved = True
        return ep.result()


def local_label(label: Label, agent: int) -> Label:
    """The part of a label that concerns ``agent`` alone."""
    return frozenset(bp for bp in label if bp.agents == (agent,))


def subtask_reward(label: Label, prop: str, agent: int) -> float:
    """1 exactly when the agent's local label is ``{prop(agent)}``."""
    return 1.0 if local_label(label, agent) == {BoundProp(prop, (agent,))} else 0.0


class ModularLearner:
    """A meta policy assigns one subtask per agent; agents learn subtasks locally.

    The meta policy sees the joint environment state together with the team
    machine state and re-decides when some agent's subtask reward fires or
    after ``max_option_length`` steps. Every subtask of an agent is updated
    off-policy on each step.

    """

    def __init__(
        self,
        team_rm: RewardMachine,
        subtasks: Mapping[int, Sequence[str]],
        cfg: LearningConfig,
    ) -> None:
        agents = tuple(range(1, len(subtasks) + 1))
        if tuple(sorted(subtasks)) != agents:
            raise PartitionError(
                f"Subtasks must be given for agents 1..{len(subtasks)},"
                f" got {sorted(subtasks)}."
            )
        empty = [i for i in agents if not subtasks[i]]
        if empty:
            raise PartitionError(f"Agents {empty} have no subtasks.")
        self.team_rm = team_rm
        self.cfg = cfg
        self.agents = agents
        self.subtasks = {i: tuple(sorted(subtasks[i])) for i in agents}
        self.options = tuple(
            SubtaskOption.of(zip(choice, ((i,) for i in agents)))
            for choice in product(*(self.subtasks[i] for i in agents))
        )
        self.sub = QStore()
        self.meta = QStore()
        self.decision_steps: List[int] = []
        RmInstance(team_rm, agents)

    def _update_subtasks(
        self,
        local: Tuple[Hashable, ...],
        action: Tuple[int, ...],
        next_local: Tuple[Hashable, ...],
        label: Label,
    ) -> None:
        alpha, gamma = self.cfg.alpha, self.cfg.gamma
        for i in self.agents:
            s, a, s2 = local[i - 1], action[i - 1], next_local[i - 1]
            for prop in self.subtasks[i]:
                reward = subtask_reward(label, prop, i)
                future = 0.0 if reward else float(self.sub.actions(prop, i, s2).max())
                row = self.sub.action_row(prop, i, s)
                row[a] += alpha * (reward + gamma * future - row[a])

    def run_episode(
        self,
        env: GridWorld,
        rng: Generator,
        epsilon: float,
        learn: bool = True,
        on_step: Optional[Callable[[], bool]] = None,
        record: bool = False,
    ) -> EpisodeResult:
        ep = EpisodeContext.begin(env, rng, epsilon, learn, on_step, record)
        team = RmInstance(self.team_rm, self.agents)
        if record:
            self.decision_steps = []
        cfg = self.cfg
        while not ep.done:
            before = (ep.state, team.current)
            if record:
                self.decision_steps.append(env.t)
            option = select_option(self.meta, META, (), before, self.options,
                                   epsilon, rng)
            ret, tau = 0.0, 0
            while not ep.done:
                local = tuple(env.local_state(ep.state, i) for i in self.agents)
                action = tuple(
                    select_action(self.sub.actions(option.prop_of(i), i, local[i - 1]),
                                  epsilon, rng)
                    for i in self.agents
                )
                _, nxt, label = ep.advance(action)
                tau += 1
                if learn:
                    next_local = tuple(env.local_state(nxt, i) for i in self.agents)
                    self._update_subtasks(local, action, next_local, label)
                step = rm_step(team, label)
                ret = accumulate_return(ret, tau - 1, step.reward, cfg.gamma)
                if team.is_terminal:
                    ep.solved = True
                    break
                fired = any(
                    subtask_reward(label, option.prop_of(i), i) for i in self.agents
                )
                if fired or tau >= cfg.max_option_length:
                    break
            if learn and tau > 0:
                after = (ep.state, team.current)
                option_update(
                    self.meta,
                    META,
                    (),
                    before,
                    option,
                    ret,
                    tau,
                    after,
                    () if team.is_terminal else self.options,
                    cfg,
                )
        return ep.result()


def train_iqrm(
    team_rm: RewardMachine, env: GridWorld, cfg: LearningConfig
) -> TrainingResult:
    return train(IqrmLearner(team_rm, env.n_agents, cfg), env, cfg)


def train_modular(
    subtasks: Mapping[int, Sequence[str]],
    team_rm: RewardMachine,
    env: GridWorld,
    cfg: LearningConfig,
) -> TrainingResult:
    learner = ModularLearner(team_rm, subtasks, cfg)
    logger.info("Meta policy has %d subtask assignments", len(learner.options))
    return train(learner, env, cfg)
