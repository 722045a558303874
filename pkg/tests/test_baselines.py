"""IQRM and modular baseline tests"""

# SPDX-License-Identifier: BSD-3-Clause

import pytest
from numpy.random import default_rng

from hrmarl.baselines import (
    IqrmLearner,
    ModularLearner,
    local_label,
    subtask_reward,
    train_iqrm,
    train_modular,
)
from hrmarl.envs import NavigationEnv
from hrmarl.hierarchy import PartitionError
from hrmarl.lang import parse_layout, parse_rm
from hrmarl.learners import LearningConfig
from hrmarl.machine import ArityError, make_label
from .utils import get_asset_path, get_test_path


@pytest.fixture(scope="module")
def solo_rm():
    return parse_rm(get_test_path("solo.rm"))


def solo_env(layout, cap=100):
    return NavigationEnv(parse_layout(get_test_path(layout)), cap=cap)


@pytest.mark.parametrize(
    "label, prop, agent, exp",
    [
        (make_label(("a", [1])), "a", 1, 1.0),
        (make_label(("a", [1]), ("b", [2])), "a", 1, 1.0),
        (make_label(("a", [1]), ("b", [1])), "a", 1, 0.0),
        (make_label(("a", [1])), "a", 2, 0.0),
        (make_label(("a", [2])), "b", 2, 0.0),
        (frozenset(), "a", 1, 0.0),
    ],
)
def test_subtask_reward(label, prop, agent, exp):
    assert subtask_reward(label, prop, agent) == exp


def test_local_label_drops_joint_props():
    label = make_label(("a", [1]), ("ab", [1, 2]), ("b", [2]))
    assert local_label(label, 1) == make_label(("a", [1]))


def test_iqrm_binding_mismatch():
    team = parse_rm(get_asset_path("pass", "flat_team.rm"))
    with pytest.raises(ArityError):
        IqrmLearner(team, 2, LearningConfig())


def test_iqrm_tables_per_agent():
    team = parse_rm(get_asset_path("navigation", "n2", "flat_team.rm"))
    learner = IqrmLearner(team, 2, LearningConfig())
    assert len(learner.tables) == 2
    assert learner.tables[0] is not learner.tables[1]


def test_iqrm_episode_solves_on_team_terminal(solo_rm):
    learner = IqrmLearner(solo_rm, 1, LearningConfig())
    learner.tables[0].action_row("solo", "u0", (0, 0))[3] = 1.0
    result = learner.run_episode(solo_env("adjacent.layout"), default_rng(0), 0.0,
                                 learn=False)
    assert (result.steps, result.solved) == (1, True)


def test_modular_options():
    team = parse_rm(get_asset_path("navigation", "n2", "flat_team.rm"))
    learner = ModularLearner(team, {1: ["l2", "l1"], 2: ["l1"]}, LearningConfig())
    assert learner.subtasks == {1: ("l1", "l2"), 2: ("l1",)}
    assert len(learner.options) == 2
    assert {o.prop_of(1) for o in learner.options} == {"l1", "l2"}


@pytest.mark.parametrize(
    "subtasks",
    [
        {1: ["l1"], 3: ["l2"]},
        {1: ["l1"], 2: []},
    ],
)
def test_modular_bad_subtasks(subtasks):
    team = parse_rm(get_asset_path("navigation", "n2", "flat_team.rm"))
    with pytest.raises(PartitionError):
        ModularLearner(team, subtasks, LearningConfig())


def test_modular_redecides_after_option_length(solo_rm):
    learner = ModularLearner(solo_rm, {1: ["l1"]}, LearningConfig())
    result = learner.run_episode(solo_env("blocked.layout", cap=200),
                                 default_rng(0), 1.0, record=True)
    assert not result.solved
    assert learner.decision_steps == [0, 50, 100, 150]


def test_modular_redecides_when_subtask_fires(solo_rm):
    learner = ModularLearner(solo_rm, {1: ["l1"]}, LearningConfig())
    learner.sub.action_row("l1", 1, (0, 0))[3] = 1.0
    result = learner.run_episode(solo_env("adjacent.layout"), default_rng(0), 0.0,
                                 learn=False, record=True)
    assert (result.steps, result.solved) == (1, True)
    assert learner.decision_steps == [0]


def test_modular_meta_update(solo_rm):
    cfg = LearningConfig()
    learner = ModularLearner(solo_rm, {1: ["l1"]}, cfg)
    learner.sub.action_row("l1", 1, (0, 0))[3] = 1.0
    env = solo_env("adjacent.layout")
    learner.run_episode(env, default_rng(0), 0.0, learn=True)
    (option,) = learner.options
    start = (env.initial_state(), "u0")
    assert learner.meta.option_value("meta", (), start, option) == pytest.approx(0.1)


@pytest.mark.parametrize("algorithm", ["iqrm", "modular"])
def test_baselines_learn_corridor(solo_rm, algorithm):
    cfg = LearningConfig(train_steps=20000, eval_period=20000, seed=1)
    env = solo_env("corridor.layout")
    if algorithm == "iqrm":
        result = train_iqrm(solo_rm, env, cfg)
    else:
        result = train_modular({1: ("l1",)}, solo_rm, env, cfg)
    assert result.rows[-1] == (20000, 4)


def test_baselines_deterministic(solo_rm):
    cfg = LearningConfig(train_steps=1500, eval_period=500, seed=9)
    first = train_modular({1: ("l1",)}, solo_rm, solo_env("corridor.layout"), cfg)
    second = train_modular({1: ("l1",)}, solo_rm, solo_env("corridor.layout"), cfg)
    assert first.rows == second.rows
