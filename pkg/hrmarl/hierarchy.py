"""Proposition hierarchies and the option spaces they induce"""

# SPDX-License-Identifier: BSD-3-Clause

from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .diagnostics import Diagnostic, error
from .machine import (
    BoundProp,
    Label,
    Proposition,
    RewardMachine,
    RmInstance,
    primitive_machine,
    transition,
)

__all__ = [
    "LevelRuntime",
    "PartitionError",
    "PropositionHierarchy",
    "SubtaskOption",
    "enumerate_partitions",
    "level1_option",
    "option_space",
    "validate_coverage",
]

Agents = Tuple[int, ...]


class PartitionError(ValueError):
    """Raised when agents cannot be split over the requested slots."""


@dataclass(frozen=True, order=True)
class SubtaskOption:
    """Child propositions assigned to disjoint agent tuples.

    Parts are kept sorted by agent tuple so that equal assignments compare
    equal regardless of construction order.

    """

    parts: Tuple[Tuple[str, Agents], ...]

    def __post_init__(self) -> None:
        parts = tuple(sorted(((q, tuple(ag)) for q, ag in self.parts), key=_by_agents))
        object.__setattr__(self, "parts", parts)
        flat = [a for _, ag in parts for a in ag]
        if len(set(flat)) != len(flat):
            raise PartitionError(f"Agent tuples overlap in {self}.")

    @classmethod
    def of(cls, parts: Iterable[Tuple[str, Sequence[int]]]) -> "SubtaskOption":
        return cls(tuple((q, tuple(ag)) for q, ag in parts))

    @property
    def agents(self) -> FrozenSet[int]:
        return frozenset(a for _, ag in self.parts for a in ag)

    @property
    def label(self) -> Label:
        """The union of the instantiated child propositions."""
        return frozenset(BoundProp(q, ag) for q, ag in self.parts)

    def prop_of(self, agent: int) -> str:
        for q, ag in self.parts:
            if agent in ag:
                return q
        raise KeyError(agent)

    def __len__(self) -> int:
        return len(self.parts)

    def __str__(self) -> str:
        return "(" + ", ".join(str(BoundProp(q, ag)) for q, ag in self.parts) + ")"


def _by_agents(part: Tuple[str, Agents]) -> Tuple[Agents, str]:
    return part[1], part[0]


@dataclass(frozen=True)
class PropositionHierarchy:
    """Levels of propositions, each non-primitive one bound to a machine.

    ``levels[0]`` holds the primitive propositions and ``levels[-1]`` the
    single joint task. Primitive propositions have no entry in ``machines``;
    :meth:`machine` builds their two-state machine on demand.

    """

    levels: Tuple[FrozenSet[str], ...]
    props: Mapping[str, Proposition]
    children: Mapping[str, FrozenSet[str]]
    machines: Mapping[str, RewardMachine]
    origin: str = field(default="<string>", compare=False)
    _options: Dict[Tuple[str, Agents, str], Tuple[SubtaskOption, ...]] = field(
        default_factory=dict, init=False, compare=False, repr=False
    )

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> str:
        (name,) = self.levels[-1]
        return name

    @property
    def n_agents(self) -> int:
        return self.props[self.top].arity

    @property
    def primitives(self) -> Tuple[str, ...]:
        return tuple(sorted(self.levels[0]))

    def level_of(self, name: str) -> int:
        for k, names in enumerate(self.levels, start=1):
            if name in names:
                return k
        raise KeyError(name)

    def machine(self, name: str) -> RewardMachine:
        if name in self.machines:
            return self.machines[name]
        return primitive_machine(self.props[name])

    def top_instance(self) -> RmInstance:
        return RmInstance(self.machine(self.top), tuple(range(1, self.n_agents + 1)))

    def top_option(self) -> SubtaskOption:
        return SubtaskOption.of([(self.top, range(1, self.n_agents + 1))])


def enumerate_partitions(
    agents: Iterable[int], arities: Sequence[int]
) -> FrozenSet[Tuple[Agents, ...]]:
    """All role-ordered ways to deal ``agents`` into slots of the given sizes.

    :raises PartitionError: when the slot sizes do not sum to the agent count.

    """
    pool = tuple(sorted(agents))
    if sum(arities) != len(pool):
        raise PartitionError(
            f"Slots of sizes {tuple(arities)} cannot hold {len(pool)} agents."
        )
    found = set()
    for perm in permutations(pool):
        parts, start = [], 0
        for size in arities:
            parts.append(perm[start:start + size])
            start += size
        found.add(tuple(parts))
    return frozenset(found)


def option_space(
    h: PropositionHierarchy, p: str, binding: Sequence[int], u: str
) -> Tuple[SubtaskOption, ...]:
    """Options at state ``u`` of ``p`` bound to ``binding``.

    An option qualifies when its agent tuples partition the binding and the
    union of its bound child propositions moves ``p``'s machine out of ``u``.
    Results are sorted and cached per hierarchy.

    """
    binding = tuple(binding)
    key = (p, binding, u)
    if key in h._options:
        return h._options[key]
    rm = h.machine(p)
    if rm.is_terminal(u):
        h._options[key] = ()
        return ()

    children = sorted(h.children.get(p, ()))
    found = set()
    for m in range(1, len(binding) + 1):
        for combo in combinations_with_replacement(children, m):
            arities = [h.props[q].arity for q in combo]
            if sum(arities) != len(binding):
                continue
            for assignment in enumerate_partitions(binding, arities):
                option = SubtaskOption.of(zip(combo, assignment))
                if transition(rm, binding, u, option.label)[0] != u:
                    found.add(option)
    result = tuple(sorted(found))
    h._options[key] = result
    return result


def validate_coverage(h: PropositionHierarchy, n_agents: int) -> List[Diagnostic]:
    """Reports machine states from which no option can make progress.

    Every non-primitive proposition is checked under its canonical binding
    ``(1, ..., arity)`` at each non-terminal state.

    """
    diags = []
    top = h.props[h.top]
    if top.arity != n_agents:
        diags.append(
            error(h.origin, 1, 1, f"joint task {h.top!r} has arity {top.arity},"
                  f" environment has {n_agents} agents", "agent-count")
        )
    for level in h.levels[1:]:
        for name in sorted(level):
            rm = h.machine(name)
            binding = tuple(range(1, h.props[name].arity + 1))
            for u in rm.states:
                if rm.is_terminal(u) or option_space(h, name, binding, u):
                    continue
                diags.append(
                    error(rm.origin or h.origin, rm.state_lines.get(u, 1), 1,
                          f"dead state {u!r} of {name!r}: no option over its children"
                          f" leaves it", "dead-state")
                )
    return diags


def level1_option(
    h: PropositionHierarchy,
    assignments: Union[Sequence[str], Mapping[int, str]],
    n_agents: Optional[int] = None,
) -> SubtaskOption:
    """One primitive proposition per agent, as a level-1 option.

    :param assignments: Proposition names indexed by agent ID, or a sequence
        whose ``i``-th entry belongs to agent ``i + 1``.
    :raises PartitionError: when an agent in ``1..n_agents`` has no entry.

    """
    if not isinstance(assignments, Mapping):
        assignments = {i: q for i, q in enumerate(assignments, start=1)}
    n = len(assignments) if n_agents is None else n_agents
    missing = [i for i in range(1, n + 1) if i not in assignments]
    if missing or len(assignments) != n:
        raise PartitionError(f"No primitive proposition for agents {missing}.")
    stray = [q for q in assignments.values() if q not in h.levels[0]]
    if stray:
        raise ValueError(f"Not primitive propositions: {', '.join(stray)}.")
    return SubtaskOption.of((q, (i,)) for i, q in sorted(assignments.items()))


@dataclass
class LevelRuntime:
    """Machine instances of the option currently running at one level.

    Option step counts and discounted returns live with the episode clock
    and the recursive call running the option.

    """

    level: int
    option: SubtaskOption
    instances: List[RmInstance]

    @classmethod
    def start(
        cls, h: PropositionHierarchy, level: int, option: SubtaskOption
    ) -> "LevelRuntime":
        instances = [RmInstance(h.machine(q), ag) for q, ag in option.parts]
        return cls(level, option, instances)

    @property
    def terminated(self) -> Label:
        """Bound propositions whose instances have reached a terminal state."""
        return frozenset(inst.bound for inst in self.instances if inst.is_terminal)
