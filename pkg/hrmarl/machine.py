"""Reward machines over concurrent-event labels"""

# SPDX-License-Identifier: BSD-3-Clause

from dataclasses import dataclass, field
from functools import lru_cache
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

__all__ = [
    "ArityError",
    "Atom",
    "BoundProp",
    "Guard",
    "Label",
    "Proposition",
    "RewardMachine",
    "RmInstance",
    "StepResult",
    "TerminalStepError",
    "Transition",
    "guard_matches",
    "make_label",
    "make_primitive_rm",
    "primitive_machine",
    "replay",
    "rm_alphabet",
    "rm_step",
    "transition",
]


class ArityError(ValueError):
    """Raised when agent tuples do not fit a proposition or machine."""


class TerminalStepError(RuntimeError):
    """Raised when a machine instance in a terminal state is stepped."""


@dataclass(frozen=True, order=True)
class Proposition:
    """A named high-level event with a fixed number of agent slots."""

    name: str
    arity: int

    def __post_init__(self) -> None:
        if self.arity < 0:
            raise ArityError(f"Negative arity for proposition {self.name!r}.")

    def __str__(self) -> str:
        return f"{self.name}({self.arity})"


@dataclass(frozen=True, order=True)
class BoundProp:
    """A proposition instantiated with concrete agent IDs, e.g. ``a(1)``."""

    prop: str
    agents: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.agents)) != len(self.agents):
            raise ArityError(f"Repeated agent in {self}.")

    def __str__(self) -> str:
        return f"{self.prop}({','.join(str(a) for a in self.agents)})"


# A label is the set of bound propositions true on one transition.
Label = FrozenSet[BoundProp]

EMPTY_LABEL: Label = frozenset()


def make_label(*props: Tuple[str, Sequence[int]]) -> Label:
    """Builds a label from ``(name, agents)`` pairs."""
    return frozenset(BoundProp(name, tuple(agents)) for name, agents in props)


@dataclass(frozen=True)
class Atom:
    """A guard atom: ``p(i,j)`` over formal parameters, or the wildcard ``p(*)``."""

    prop: str
    params: Optional[Tuple[str, ...]] = None

    @property
    def is_wildcard(self) -> bool:
        return self.params is None

    def __str__(self) -> str:
        if self.params is None:
            return f"{self.prop}(*)"
        return f"{self.prop}({','.join(self.params)})"


@dataclass(frozen=True)
class Guard:
    atoms: Tuple[Atom, ...]

    def __str__(self) -> str:
        return " & ".join(str(a) for a in self.atoms)


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Guard
    reward: Optional[float] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RewardMachine:
    """An immutable reward machine definition.

    Transitions are kept in document order; the first one out of a state whose
    guard matches a label wins. Labels matching no guard leave the state
    unchanged with reward 0.

    """

    name: str
    formal_params: Tuple[str, ...]
    states: Tuple[str, ...]
    initial: str
    terminals: FrozenSet[str]
    transitions: Tuple[Transition, ...]
    origin: str = field(default="", compare=False)
    state_lines: Mapping[str, int] = field(
        default_factory=dict, compare=False, repr=False
    )
    _outgoing: Dict[str, Tuple[Transition, ...]] = field(
        default_factory=dict, init=False, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        grouped: Dict[str, List[Transition]] = {state: [] for state in self.states}
        for trans in self.transitions:
            grouped.setdefault(trans.source, []).append(trans)
        self._outgoing.update({k: tuple(v) for k, v in grouped.items()})

    def outgoing(self, state: str) -> Tuple[Transition, ...]:
        return self._outgoing.get(state, ())

    def is_terminal(self, state: str) -> bool:
        return state in self.terminals

    def reward_of(self, trans: Transition) -> float:
        """Explicit reward, or 1 exactly when entering a terminal state."""
        if trans.reward is not None:
            return trans.reward
        if trans.source not in self.terminals and trans.target in self.terminals:
            return 1.0
        return 0.0


def _binding_map(rm: RewardMachine, binding: Sequence[int]) -> Dict[str, int]:
    if len(binding) != len(rm.formal_params):
        raise ArityError(
            f"Machine {rm.name!r} takes {len(rm.formal_params)} agents,"
            f" got {len(binding)}."
        )
    return dict(zip(rm.formal_params, binding))


def _wildcards_fit(
    candidates: List[List[BoundProp]], taken: FrozenSet[int], idx: int = 0
) -> bool:
    # Backtracking over pairwise disjoint choices, one per wildcard atom.
    if idx == len(candidates):
        return True
    for bp in candidates[idx]:
        if taken.isdisjoint(bp.agents):
            if _wildcards_fit(candidates, taken | frozenset(bp.agents), idx + 1):
                return True
    return False


def guard_matches(guard: Guard, binding: Mapping[str, int], label: Label) -> bool:
    """Whether every atom of the guard is satisfied by the label.

    Bound atoms must be present verbatim once parameters are substituted.
    Each wildcard atom needs its own label entry over the bound agents, and
    the agents used by different wildcard atoms must not overlap.

    """
    pool = frozenset(binding.values())
    candidates: List[List[BoundProp]] = []
    for atom in guard.atoms:
        if atom.params is None:
            found = sorted(
                bp
                for bp in label
                if bp.prop == atom.prop and pool.issuperset(bp.agents)
            )
            if not found:
                return False
            candidates.append(found)
        elif BoundProp(atom.prop, tuple(binding[p] for p in atom.params)) not in label:
            return False
    return _wildcards_fit(candidates, frozenset())


def transition(
    rm: RewardMachine, binding: Sequence[int], state: str, label: Label
) -> Tuple[str, float]:
    """Pure transition function: returns the next state and its reward."""
    if not label:
        return state, 0.0
    mapping = _binding_map(rm, binding)
    for trans in rm.outgoing(state):
        if guard_matches(trans.guard, mapping, label):
            return trans.target, rm.reward_of(trans)
    return state, 0.0


def rm_alphabet(rm: RewardMachine) -> FrozenSet[str]:
    """Names of the propositions appearing in any guard of the machine."""
    return frozenset(atom.prop for t in rm.transitions for atom in t.guard.atoms)


class StepResult(NamedTuple):
    state: str
    reward: float
    entered_terminal: bool


@dataclass
class RmInstance:
    """A machine bound to concrete agents, with its current state."""

    machine: RewardMachine
    binding: Tuple[int, ...]
    current: str = ""

    def __post_init__(self) -> None:
        self.binding = tuple(self.binding)
        _binding_map(self.machine, self.binding)
        if len(set(self.binding)) != len(self.binding):
            raise ArityError(f"Repeated agent in binding {self.binding}.")
        if not self.current:
            self.current = self.machine.initial

    @property
    def prop(self) -> str:
        return self.machine.name

    @property
    def bound(self) -> BoundProp:
        return BoundProp(self.machine.name, self.binding)

    @property
    def is_terminal(self) -> bool:
        return self.current in self.machine.terminals

    def peek(self, label: Label) -> Tuple[str, float]:
        return transition(self.machine, self.binding, self.current, label)


def rm_step(inst: RmInstance, label: Label) -> StepResult:
    """Advances an instance on a label."""
    if inst.is_terminal:
        raise TerminalStepError(
            f"Instance {inst.bound} is already in terminal state {inst.current!r}."
        )
    nxt, reward = inst.peek(label)
    entered = nxt != inst.current and nxt in inst.machine.terminals
    inst.current = nxt
    return StepResult(nxt, reward, entered)


@lru_cache(maxsize=None)
def primitive_machine(prop: Proposition) -> RewardMachine:
    """Two-state machine accepting the first label containing ``prop(i)``."""
    if prop.arity != 1:
        raise ArityError(
            f"Primitive machines need arity 1, {prop.name!r} has {prop.arity}."
        )
    guard = Guard((Atom(prop.name, ("i",)),))
    return RewardMachine(
        name=prop.name,
        formal_params=("i",),
        states=("u0", "u1"),
        initial="u0",
        terminals=frozenset({"u1"}),
        transitions=(Transition("u0", "u1", guard),),
        origin="<primitive>",
    )


def make_primitive_rm(prop: Proposition, agent: int) -> RmInstance:
    return RmInstance(primitive_machine(prop), (agent,))


def replay(inst: RmInstance, labels: Iterable[Label]) -> List[StepResult]:
    """Steps an instance through labels until it terminates."""
    results = []
    for label in labels:
        if inst.is_terminal:
            break
        results.append(rm_step(inst, label))
    return results
