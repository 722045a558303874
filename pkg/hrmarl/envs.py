"""Multi-agent grid worlds: Navigation, MineCraft and Pass"""

# SPDX-License-Identifier: BSD-3-Clause

import logging
from collections import deque
from dataclasses import dataclass, replace
from itertools import permutations, product
from pathlib import Path
from typing import (
    ClassVar,
    Dict,
    FrozenSet,
    Hashable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
    Type,
    Union,
)

import click

from . import ASSETS_DIR
from .lang import Cell, GridLayout, parse_layout
from .machine import BoundProp, Label, RewardMachine, transition

__all__ = [
    "ACTIONS",
    "DOMAINS",
    "DomainSpec",
    "EpisodeOverrunError",
    "GridLayout",
    "GridWorld",
    "JointAction",
    "JointState",
    "MineCraftEnv",
    "NavigationEnv",
    "PassEnv",
    "assignment_oracle",
    "domain_spec",
    "make_env",
    "oracle_steps",
]

logger = logging.getLogger(__name__)

ACTIONS = ("up", "down", "left", "right", "stay")
STAY = ACTIONS.index("stay")

_MOVES = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
    "stay": (0, 0),
}

# One action index per agent, agent 1 first.
JointAction = Tuple[int, ...]


class EpisodeOverrunError(RuntimeError):
    """Raised when an environment is stepped past its episode cap."""


@dataclass(frozen=True)
class JointState:
    """Positions of all agents plus domain extras.

    ``inventory`` is only used by MineCraft and ``door_open`` only by Pass.

    """

    positions: Tuple[Cell, ...]
    inventory: Tuple[FrozenSet[str], ...] = ()
    door_open: bool = False


class GridWorld:
    """Deterministic grid world with simultaneous moves.

    Moves out of bounds, into walls or through a closed door become ``stay``.
    When several agents end up on one cell, an agent that did not move keeps
    it, otherwise the lowest agent ID does; the others stay where they were.
    This repeats until no cell is shared. Swapping places is allowed.

    """

    name: ClassVar[str] = "grid"

    def __init__(self, layout: GridLayout, cap: int = 500) -> None:
        if cap < 1:
            raise ValueError(f"Episode cap must be positive, got {cap}.")
        self.layout = layout
        self.cap = cap
        self.t = 0

    @property
    def n_agents(self) -> int:
        return self.layout.n_agents

    @property
    def agents(self) -> Tuple[int, ...]:
        return tuple(range(1, self.n_agents + 1))

    def initial_state(self) -> JointState:
        positions = tuple(self.layout.starts[i] for i in self.agents)
        return self._complete(JointState(positions), None)

    def reset(self, seed: Optional[int] = None) -> JointState:
        # Dynamics are deterministic; the seed only keeps the call signature
        # uniform with stochastic environments.
        self.t = 0
        return self.initial_state()

    def step(self, state: JointState, action: JointAction) -> Tuple[JointState, Label]:
        """Advances the episode clock and applies one joint action."""
        if self.t >= self.cap:
            raise EpisodeOverrunError(
                f"{self.name} episode already reached its cap of {self.cap} steps."
            )
        self.t += 1
        return self.transition(state, action)

    def transition(
        self, state: JointState, action: JointAction
    ) -> Tuple[JointState, Label]:
        """Pure joint dynamics: next state and its label."""
        if len(action) != self.n_agents:
            raise ValueError(
                f"Joint action has {len(action)} entries, expected {self.n_agents}."
            )
        current = state.positions
        proposed = [
            self._move(state, cell, ACTIONS[a]) for cell, a in zip(current, action)
        ]
        resolved = _resolve_conflicts(current, proposed)
        nxt = self._complete(replace(state, positions=resolved), state)
        return nxt, self.label(state, action, nxt)

    def _move(self, state: JointState, cell: Cell, action: str) -> Cell:
        dr, dc = _MOVES[action]
        target = (cell[0] + dr, cell[1] + dc)
        if not self.layout.in_bounds(target) or target in self.layout.walls:
            return cell
        doors = self.layout.doors
        crossing = target in doors or cell in doors
        if crossing and target != cell and not state.door_open:
            return cell
        return target

    def _complete(self, nxt: JointState, prev: Optional[JointState]) -> JointState:
        """Fills in domain extras of a state whose positions are final."""
        return nxt

    def label(self, state: JointState, action: JointAction, nxt: JointState) -> Label:
        raise NotImplementedError

    def local_state(self, state: JointState, agent: int) -> Hashable:
        return state.positions[agent - 1]

    def neighbours(self, cell: Cell) -> Set[Cell]:
        """Cells one free move away, ignoring doors and other agents."""
        found = set()
        for dr, dc in _MOVES.values():
            target = (cell[0] + dr, cell[1] + dc)
            if self.layout.in_bounds(target) and target not in self.layout.walls:
                found.add(target)
        return found


def _resolve_conflicts(
    current: Sequence[Cell], proposed: Sequence[Cell]
) -> Tuple[Cell, ...]:
    final = list(proposed)
    while True:
        claims: Dict[Cell, List[int]] = {}
        for idx, cell in enumerate(final):
            claims.setdefault(cell, []).append(idx)
        losers = []
        for cell, idxs in claims.items():
            if len(idxs) < 2:
                continue
            keepers = [i for i in idxs if current[i] == cell]
            winner = keepers[0] if keepers else min(idxs)
            losers.extend(i for i in idxs if i != winner)
        if not losers:
            return tuple(final)
        for idx in losers:
            final[idx] = current[idx]


class NavigationEnv(GridWorld):
    """Agents reach landmarks; ``l(i)`` holds while agent ``i`` is on ``l``."""

    name = "navigation"

    def label(self, state: JointState, action: JointAction, nxt: JointState) -> Label:
        return frozenset(
            BoundProp(prop, (agent,))
            for agent, cell in enumerate(nxt.positions, start=1)
            for prop in self.layout.props_at(cell)
        )


class MineCraftEnv(GridWorld):
    """Agents collect raw objects.

    ``p(i)`` holds on the step agent ``i`` first occupies a cell of object
    ``p``; the object then sits in the agent's inventory and never fires again
    for that agent.

    """

    name = "minecraft"

    def _complete(self, nxt: JointState, prev: Optional[JointState]) -> JointState:
        if prev is None:
            return replace(nxt, inventory=tuple(frozenset() for _ in nxt.positions))
        inventory = tuple(
            inv | self.layout.props_at(cell)
            for inv, cell in zip(prev.inventory, nxt.positions)
        )
        return replace(nxt, inventory=inventory)

    def label(self, state: JointState, action: JointAction, nxt: JointState) -> Label:
        return frozenset(
            BoundProp(prop, (agent,))
            for agent, (cell, held) in enumerate(
                zip(nxt.positions, state.inventory), start=1
            )
            for prop in self.layout.props_at(cell)
            if prop not in held
        )

    def local_state(self, state: JointState, agent: int) -> Hashable:
        return state.positions[agent - 1], tuple(sorted(state.inventory[agent - 1]))


class PassEnv(GridWorld):
    """Two rooms joined by door cells.

    The door is open while at least two button cells are occupied. ``p(i)``
    holds while agent ``i`` stands on button ``p`` and ``room(i)`` while it is
    right of the door column.

    """

    name = "pass"

    def __init__(self, layout: GridLayout, cap: int = 1000) -> None:
        if not layout.doors:
            raise click.BadParameter(f"Pass layout {layout.origin} has no door cells.")
        super().__init__(layout, cap)
        self.room_prop = layout.meta.get("room", "room")
        self.door_column = min(c for _, c in layout.doors)
        self.buttons = frozenset(
            cell for marker in layout.markers.values() for cell in marker.cells
        )

    def _complete(self, nxt: JointState, prev: Optional[JointState]) -> JointState:
        pressed = sum(1 for cell in nxt.positions if cell in self.buttons)
        return replace(nxt, door_open=pressed >= 2)

    def in_room(self, cell: Cell) -> bool:
        return cell[1] > self.door_column

    def label(self, state: JointState, action: JointAction, nxt: JointState) -> Label:
        found = set()
        for agent, cell in enumerate(nxt.positions, start=1):
            found.update(BoundProp(p, (agent,)) for p in self.layout.props_at(cell))
            if self.in_room(cell):
                found.add(BoundProp(self.room_prop, (agent,)))
        return frozenset(found)

    def local_state(self, state: JointState, agent: int) -> Hashable:
        return state.positions[agent - 1], state.door_open


def oracle_steps(env: GridWorld, team_rm: RewardMachine) -> int:
    """Fewest steps to drive ``team_rm`` into a terminal state.

    Breadth-first search over pairs of joint state and machine state using
    every joint action; Navigation with more than three agents falls back to
    :func:`assignment_oracle`. The step on which the machine terminates is
    counted, so a task completed by standing still takes one step. Returns
    ``-1`` when the task is unreachable.

    """
    if env.name == NavigationEnv.name and env.n_agents > 3:
        return assignment_oracle(env)
    binding = env.agents
    start = (env.initial_state(), team_rm.initial)
    seen = {start}
    frontier = deque([(start, 0)])
    actions = list(product(range(len(ACTIONS)), repeat=env.n_agents))
    while frontier:
        (state, u), depth = frontier.popleft()
        expanded: Set[JointState] = set()
        for action in actions:
            nxt, label = env.transition(state, action)
            # Labels depend on the state pair only, not on the action taken.
            if nxt in expanded:
                continue
            expanded.add(nxt)
            u2, _ = transition(team_rm, binding, u, label)
            if team_rm.is_terminal(u2):
                return depth + 1
            if (nxt, u2) not in seen:
                seen.add((nxt, u2))
                frontier.append(((nxt, u2), depth + 1))
    return -1


def _distances(env: GridWorld, source: Cell) -> Dict[Cell, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        for nxt in env.neighbours(cell):
            if nxt not in dist:
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return dist


def assignment_oracle(env: GridWorld) -> int:
    """Shortest makespan over all agent-to-landmark assignments.

    Uses single-agent shortest paths and ignores collisions between agents.

    """
    landmarks = [min(env.layout.cells_of(p)) for p in env.layout.propositions]
    dists = [_distances(env, env.layout.starts[i]) for i in env.agents]
    best: Optional[int] = None
    for order in permutations(range(len(dists)), len(landmarks)):
        makespan = 0
        for agent_idx, cell in zip(order, landmarks):
            makespan = max(makespan, dists[agent_idx].get(cell, env.cap + 1))
        best = makespan if best is None else min(best, makespan)
    return max(1, best if best is not None else 0)


class DomainSpec(NamedTuple):
    """Bundled assets and defaults of one benchmark setting."""

    name: str
    n_agents: int
    env_cls: Type[GridWorld]
    layout: Path
    hierarchy: Path
    team_rm: Path
    gamma: float
    cap: int
    train_steps: int


def _spec(
    name: str,
    n_agents: int,
    env_cls: Type[GridWorld],
    subdir: str,
    gamma: float,
    cap: int,
    train_steps: int,
) -> DomainSpec:
    base = ASSETS_DIR / subdir
    return DomainSpec(
        name,
        n_agents,
        env_cls,
        base / f"{name}.layout",
        base / f"{name}.hier",
        base / "flat_team.rm",
        gamma,
        cap,
        train_steps,
    )


DOMAINS: Mapping[Tuple[str, int], DomainSpec] = {
    ("navigation", 2): _spec(
        "navigation", 2, NavigationEnv, "navigation/n2", 0.9, 500, 300_000
    ),
    ("navigation", 3): _spec(
        "navigation", 3, NavigationEnv, "navigation/n3", 0.9, 500, 300_000
    ),
    ("navigation", 5): _spec(
        "navigation", 5, NavigationEnv, "navigation/n5", 0.9, 500, 300_000
    ),
    ("minecraft", 3): _spec(
        "minecraft", 3, MineCraftEnv, "minecraft", 0.9, 500, 1_500_000
    ),
    ("pass", 3): _spec("pass", 3, PassEnv, "pass", 0.95, 1000, 2_000_000),
}


def domain_spec(name: str, n_agents: Optional[int] = None) -> DomainSpec:
    """Looks up a bundled domain; the smallest agent count is the default.

    :raises click.BadParameter: for unknown domains or agent counts.

    """
    candidates = sorted(n for (d, n) in DOMAINS if d == name)
    if not candidates:
        known = ", ".join(sorted({d for d, _ in DOMAINS}))
        raise click.BadParameter(f"Unknown domain {name!r}; expected one of {known}.")
    n = candidates[0] if n_agents is None else n_agents
    if n not in candidates:
        raise click.BadParameter(
            f"Domain {name!r} ships no setting for {n} agents;"
            f" available: {', '.join(map(str, candidates))}."
        )
    return DOMAINS[(name, n)]


def make_env(
    name: str,
    n_agents: Optional[int] = None,
    layout: Optional[Union[str, Path, GridLayout]] = None,
    cap: Optional[int] = None,
) -> GridWorld:
    """Builds a domain environment from bundled or overriding assets."""
    spec = domain_spec(name, n_agents)
    if layout is None:
        layout = spec.layout
    grid = layout if isinstance(layout, GridLayout) else parse_layout(layout)
    env = spec.env_cls(grid, cap=spec.cap if cap is None else cap)
    logger.info(
        "Built %s environment (%dx%d, %d agents)",
        name,
        grid.width,
        grid.height,
        grid.n_agents,
    )
    return env
