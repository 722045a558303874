"""Parsers for reward machine, hierarchy and grid layout files"""

# SPDX-License-Identifier: BSD-3-Clause

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Set,
    TextIO,
    Tuple,
    Union,
    cast,
)

from .diagnostics import Diagnostic, InvalidSpecError, error, raise_on_errors, warning
from .hierarchy import PropositionHierarchy
from .machine import (
    Atom,
    Guard,
    Proposition,
    RewardMachine,
    Transition,
    rm_alphabet,
)
from .utils import convert, get_handle, handle_name

__all__ = [
    "CycleError",
    "GridLayout",
    "Marker",
    "RmSpecSource",
    "count_accepting_paths",
    "parse_hierarchy",
    "parse_layout",
    "parse_rm",
    "read_source",
    "serialize_rm",
    "shadowed_transitions",
]

logger = logging.getLogger(__name__)


_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_RE_NAME = re.compile(rf"^{_NAME}$")
_RE_RM_HEADER = re.compile(rf"^rm\s+(?P<name>{_NAME})\s*\((?P<params>[^()]*)\)$")
_RE_RM_KEYWORD = re.compile(r"^(?P<key>states|init|terminal)\s*:\s*(?P<value>.*)$")
_RE_RM_TRANSITION = re.compile(
    rf"^(?P<src>{_NAME})\s*->\s*(?P<dst>{_NAME})\s*:\s*(?P<guard>[^=]+?)"
    r"\s*(?:=>\s*(?P<reward>\S+))?$"
)
_RE_ATOM = re.compile(rf"^(?P<prop>{_NAME})\s*\((?P<args>[^()]*)\)$")
_RE_LEVEL = re.compile(
    rf"^level\s+(?P<level>\d+)\s*:\s*(?P<name>{_NAME})\s*\(\s*(?P<arity>\d+)\s*\)"
    r"\s*(?:\{(?P<children>[^{}]*)\})?\s*(?:=\s*(?P<path>\S+))?$"
)
_RE_BIND = re.compile(rf"^bind\s+(?P<letter>[A-Za-z])\s*:\s*(?P<prop>{_NAME})$")
_RE_META = re.compile(rf"^(?P<key>{_NAME})\s*:\s*(?P<value>.*)$")

_WALL = "#"
_DOOR = "D"
_FREE = frozenset(". ")


class CycleError(ValueError):
    """Raised when explicit transitions of a machine form a cycle."""


@dataclass(frozen=True)
class RmSpecSource:
    """Raw text of an asset file together with its origin for diagnostics."""

    text: str
    origin: str = "<string>"


SourceLike = Union[RmSpecSource, str, PathLike, TextIO]


def _decode_error(origin: str, raw: bytes, exc: UnicodeDecodeError) -> Diagnostic:
    line_start = raw.rfind(b"\n", 0, exc.start) + 1
    return error(
        origin,
        raw.count(b"\n", 0, exc.start) + 1,
        exc.start - line_start + 1,
        f"invalid UTF-8 byte 0x{raw[exc.start]:02x}",
        "encoding",
    )


def read_source(in_data: SourceLike) -> RmSpecSource:
    """Reads a path or an open handle into an :class:`RmSpecSource`.

    :raises InvalidSpecError: when the input is not valid UTF-8.

    """
    if isinstance(in_data, RmSpecSource):
        return in_data
    origin = handle_name(in_data)
    if isinstance(in_data, (str, PathLike)):
        with get_handle(Path(in_data), encoding=None, mode="rb") as fh:
            raw = cast(bytes, fh.read())
        try:
            return RmSpecSource(raw.decode("utf-8"), origin)
        except UnicodeDecodeError as exc:
            raise InvalidSpecError([_decode_error(origin, raw, exc)]) from exc
    try:
        with get_handle(in_data) as fh:
            return RmSpecSource(fh.read(), origin)
    except UnicodeDecodeError as exc:
        message = f"input is not valid UTF-8: {exc.reason}"
        raise InvalidSpecError([error(origin, 1, 1, message, "encoding")]) from exc


def _content_lines(text: str) -> Iterator[Tuple[int, str, str]]:
    """Yields line number, raw line and the comment-free stripped content."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        yield lineno, raw, raw.split("#", 1)[0].strip()


def _col(raw: str, token: str = "") -> int:
    if token:
        idx = raw.find(token)
        if idx >= 0:
            return idx + 1
    return len(raw) - len(raw.lstrip()) + 1


# Reward machines


def _parse_atom(
    raw_atom: str, params: Tuple[str, ...]
) -> Tuple[Optional[Atom], Optional[str]]:
    """Parses one guard atom; returns the atom or an error message."""
    m = _RE_ATOM.match(raw_atom.strip())
    if m is None:
        return None, f"malformed guard atom {raw_atom.strip()!r}"
    args = [a.strip() for a in m.group("args").split(",")] if m.group("args") else []
    if args == ["*"]:
        return Atom(m.group("prop")), None
    if "*" in args:
        return None, f"wildcard must be the only argument in {raw_atom.strip()!r}"
    undeclared = [a for a in args if a not in params]
    if undeclared:
        return None, f"guard references undeclared parameter {undeclared[0]!r}"
    if len(set(args)) != len(args):
        return None, f"repeated parameter in {raw_atom.strip()!r}"
    return Atom(m.group("prop"), tuple(args)), None


def _reachable(initial: str, transitions: List[Transition]) -> Set[str]:
    seen = {initial}
    queue = deque([initial])
    while queue:
        state = queue.popleft()
        for trans in transitions:
            if trans.source == state and trans.target not in seen:
                seen.add(trans.target)
                queue.append(trans.target)
    return seen


def parse_rm(
    in_data: SourceLike, diagnostics: Optional[List[Diagnostic]] = None
) -> RewardMachine:
    """Parses and validates a reward machine file.

    :param in_data: Path, open handle or :class:`RmSpecSource`.
    :param diagnostics: Optional list receiving non-fatal warnings.
    :raises InvalidSpecError: on any error, with every diagnostic found.

    """
    source = read_source(in_data)
    origin = source.origin
    diags: List[Diagnostic] = []

    def err(line: int, col: int, msg: str, code: str) -> None:
        diags.append(error(origin, line, col, msg, code))

    name: Optional[str] = None
    params: Tuple[str, ...] = ()
    states: List[str] = []
    state_lines: Dict[str, int] = {}
    initial: Optional[Tuple[str, int, int]] = None
    terminals: List[Tuple[str, int, int]] = []
    transitions: List[Tuple[Transition, int]] = []
    header_line = 1

    for lineno, raw, text in _content_lines(source.text):
        if not text:
            continue
        col = _col(raw)

        if (m := _RE_RM_HEADER.match(text)) is not None:
            if name is not None:
                err(lineno, col, "duplicate rm header", "syntax")
                continue
            name, header_line = m.group("name"), lineno
            raw_params = m.group("params").strip()
            params = ()
            if raw_params:
                params = tuple(p.strip() for p in raw_params.split(","))
            if any(_RE_NAME.match(p) is None for p in params):
                err(lineno, _col(raw, "("), "malformed parameter list", "syntax")
            elif len(set(params)) != len(params):
                err(lineno, _col(raw, "("), "repeated formal parameter", "syntax")
            continue

        if name is None:
            err(lineno, col, "expected 'rm <name>(<params>)' header", "syntax")
            continue

        if (m := _RE_RM_KEYWORD.match(text)) is not None:
            key, tokens = m.group("key"), m.group("value").split()
            if key == "states":
                for tok in tokens:
                    if _RE_NAME.match(tok) is None:
                        err(lineno, _col(raw, tok), f"bad state {tok!r}", "syntax")
                    elif tok in state_lines:
                        err(lineno, _col(raw, tok), f"repeated state {tok!r}", "syntax")
                    else:
                        states.append(tok)
                        state_lines[tok] = lineno
            elif key == "init":
                if len(tokens) != 1 or initial is not None:
                    err(lineno, col, "exactly one initial state required", "syntax")
                else:
                    initial = (tokens[0], lineno, _col(raw, tokens[0]))
            else:
                terminals.extend((t, lineno, _col(raw, t)) for t in tokens)
            continue

        if (m := _RE_RM_TRANSITION.match(text)) is not None:
            atoms: List[Atom] = []
            for raw_atom in m.group("guard").split("&"):
                atom, msg = _parse_atom(raw_atom, params)
                if atom is None:
                    code = "syntax"
                    if "undeclared" in f"{msg}":
                        code = "undeclared-parameter"
                    err(lineno, _col(raw, raw_atom.strip()), f"{msg}", code)
                else:
                    atoms.append(atom)
            reward: Optional[float] = None
            if m.group("reward") is not None:
                value = convert(m.group("reward"))
                if isinstance(value, str):
                    err(lineno, _col(raw, "=>"), f"bad reward {value!r}", "syntax")
                else:
                    reward = float(value)
            trans = Transition(
                m.group("src"), m.group("dst"), Guard(tuple(atoms)), reward, lineno
            )
            transitions.append((trans, col))
            continue

        err(lineno, col, f"unrecognised line {text!r}", "syntax")

    if name is None:
        err(1, 1, "missing 'rm <name>(<params>)' header", "syntax")
    if not states:
        err(header_line, 1, "missing 'states:' declaration", "syntax")
    if initial is None:
        err(header_line, 1, "missing 'init:' declaration", "syntax")
    raise_on_errors(diags)
    assert name is not None and initial is not None

    known = set(states)
    init_state, init_line, init_col = initial
    if init_state not in known:
        err(init_line, init_col, f"unknown state {init_state!r}", "unknown-state")
    for state, line, col in terminals:
        if state not in known:
            err(line, col, f"unknown state {state!r}", "unknown-state")
    terminal_set = frozenset(t for t, _, _ in terminals)

    arities: Dict[str, Tuple[int, int]] = {}
    for trans, col in transitions:
        for endpoint in (trans.source, trans.target):
            if endpoint not in known:
                err(trans.line, col, f"unknown state {endpoint!r}", "unknown-state")
        if trans.source == trans.target:
            err(trans.line, col, "self-loops are implicit and must not be written",
                "self-loop")
        if trans.source in terminal_set:
            err(trans.line, col,
                f"transition out of terminal state {trans.source!r}",
                "terminal-exit")
        for atom in trans.guard.atoms:
            if atom.params is None:
                continue
            seen = arities.setdefault(atom.prop, (len(atom.params), trans.line))
            if seen[0] != len(atom.params):
                err(trans.line, col,
                    f"proposition {atom.prop!r} used with {len(atom.params)}"
                    f" parameters, earlier with {seen[0]} (line {seen[1]})",
                    "atom-arity")
    if not transitions:
        err(header_line, 1, f"machine {name!r} has no transitions", "empty-machine")
    raise_on_errors(diags)

    reachable = _reachable(init_state, [t for t, _ in transitions])
    for state in states:
        if state not in reachable:
            err(state_lines[state], 1, f"state {state!r} is unreachable from"
                f" {init_state!r}", "unreachable-state")
    raise_on_errors(diags)

    rm = RewardMachine(
        name=name,
        formal_params=params,
        states=tuple(states),
        initial=init_state,
        terminals=terminal_set,
        transitions=tuple(t for t, _ in transitions),
        origin=origin,
        state_lines=state_lines,
    )
    for diag in shadowed_transitions(rm):
        logger.warning("%s", diag)
        if diagnostics is not None:
            diagnostics.append(diag)
    logger.info("Loaded reward machine %s from %s", name, origin)
    return rm


def shadowed_transitions(rm: RewardMachine) -> List[Diagnostic]:
    """Warns about transitions that can never fire.

    A transition whose guard contains every atom of an earlier guard out of the
    same state is unreachable under document-order priority.

    """
    found = []
    for state in rm.states:
        outgoing = rm.outgoing(state)
        for idx, later in enumerate(outgoing):
            for earlier in outgoing[:idx]:
                if set(earlier.guard.atoms).issubset(later.guard.atoms):
                    found.append(
                        warning(
                            rm.origin,
                            later.line,
                            1,
                            f"transition {state} -> {later.target} is shadowed by"
                            f" the guard on line {earlier.line}",
                            "shadowed",
                        )
                    )
                    break
    return found


def serialize_rm(rm: RewardMachine) -> str:
    """Writes a machine back to the line-oriented text format."""
    lines = [
        f"rm {rm.name}({','.join(rm.formal_params)})",
        f"states: {' '.join(rm.states)}",
        f"init: {rm.initial}",
        f"terminal: {' '.join(s for s in rm.states if s in rm.terminals)}",
    ]
    for trans in rm.transitions:
        line = f"{trans.source} -> {trans.target} : {trans.guard}"
        if trans.reward is not None:
            line += f" => {trans.reward!r}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def count_accepting_paths(rm: RewardMachine) -> int:
    """Number of distinct transition paths from the initial to a terminal state.

    :raises CycleError: if explicit transitions form a cycle.

    """
    memo: Dict[str, int] = {}
    visiting: Set[str] = set()

    def count(state: str) -> int:
        if state in memo:
            return memo[state]
        if state in visiting:
            raise CycleError(f"Machine {rm.name!r} has a cycle through {state!r}.")
        visiting.add(state)
        total = 1 if state in rm.terminals else 0
        total += sum(count(t.target) for t in rm.outgoing(state))
        visiting.discard(state)
        memo[state] = total
        return total

    return count(rm.initial)


# Proposition hierarchies


class _Decl(NamedTuple):
    name: str
    level: int
    arity: int
    children: Tuple[str, ...]
    path: Optional[str]
    line: int
    col: int


def _find_cycle(decls: Mapping[str, _Decl]) -> Optional[List[str]]:
    color: Dict[str, int] = {}
    stack: List[str] = []

    def visit(name: str) -> Optional[List[str]]:
        color[name] = 1
        stack.append(name)
        for child in decls[name].children:
            if color.get(child) == 1:
                return stack[stack.index(child):] + [child]
            if child not in color:
                found = visit(child)
                if found:
                    return found
        stack.pop()
        color[name] = 2
        return None

    for name in sorted(decls):
        if name not in color:
            found = visit(name)
            if found:
                return found
    return None


def parse_hierarchy(
    in_data: SourceLike,
    base_dir: Optional[Union[str, PathLike]] = None,
    rm_loader: Callable[[Path], RewardMachine] = parse_rm,
    diagnostics: Optional[List[Diagnostic]] = None,
) -> PropositionHierarchy:
    """Parses and validates a proposition hierarchy file.

    Each line declares one proposition, ``level <k>: <name>(<arity>)``, and for
    non-primitive ones also its children and machine file,
    ``{child ...} = <file.rm>``. Machine paths are resolved against
    ``base_dir`` (default: the directory of the hierarchy file).

    Rules are checked in stages (syntax, graph structure, levels, machines);
    a stage only runs when the previous ones found no errors.

    """
    source = read_source(in_data)
    origin = source.origin
    if base_dir is None:
        base_dir = Path(origin).parent if not origin.startswith("<") else Path.cwd()
    diags: List[Diagnostic] = []

    def err(decl_or_line: Union[_Decl, int], msg: str, code: str, col: int = 1) -> None:
        if isinstance(decl_or_line, _Decl):
            diags.append(error(origin, decl_or_line.line, decl_or_line.col, msg, code))
        else:
            diags.append(error(origin, decl_or_line, col, msg, code))

    decls: Dict[str, _Decl] = {}
    for lineno, raw, text in _content_lines(source.text):
        if not text:
            continue
        m = _RE_LEVEL.match(text)
        if m is None:
            err(lineno, f"unrecognised line {text!r}", "syntax", _col(raw))
            continue
        children = tuple((m.group("children") or "").split())
        decl = _Decl(
            m.group("name"),
            int(m.group("level")),
            int(m.group("arity")),
            children,
            m.group("path"),
            lineno,
            _col(raw, m.group("name")),
        )
        if decl.name in decls:
            err(decl, f"duplicate proposition {decl.name!r}", "duplicate")
            continue
        if decl.level < 1:
            err(decl, "levels are numbered from 1", "syntax")
        elif decl.level == 1 and (decl.children or decl.path):
            err(decl, f"primitive proposition {decl.name!r} takes no children or"
                " machine", "syntax")
        elif decl.level > 1 and not (decl.children and decl.path):
            err(decl, f"proposition {decl.name!r} needs children and a machine"
                " file", "syntax")
        decls[decl.name] = decl
    if not decls:
        err(1, "no propositions declared", "syntax")
    raise_on_errors(diags)

    for decl in decls.values():
        for child in decl.children:
            if child not in decls:
                err(decl, f"child {child!r} of {decl.name!r} is not declared",
                    "dangling-child")
    raise_on_errors(diags)
    cycle = _find_cycle(decls)
    if cycle:
        err(decls[cycle[0]], f"cycle {' -> '.join(cycle)}", "cycle")
    raise_on_errors(diags)

    top_level = max(d.level for d in decls.values())
    if top_level < 2:
        err(min(d.line for d in decls.values()), "K >= 2 required: the hierarchy"
            " has a single level", "levels")
    for decl in decls.values():
        for child in decl.children:
            if decls[child].level != decl.level - 1:
                err(decl, f"child {child!r} (level {decls[child].level}) of"
                    f" {decl.name!r} must be at level {decl.level - 1}",
                    "cross-level")
        if decl.level == 1 and decl.arity != 1:
            err(decl, f"primitive proposition {decl.name!r} must have arity 1",
                "primitive-arity")
        if decl.arity < 1:
            err(decl, f"proposition {decl.name!r} needs at least one agent",
                "primitive-arity")
    tops = [d for d in decls.values() if d.level == top_level]
    if top_level >= 2 and len(tops) != 1:
        err(tops[1], f"level {top_level} must hold exactly one proposition", "top")
    for k in range(1, top_level + 1):
        if not any(d.level == k for d in decls.values()):
            err(tops[0], f"level {k} declares no propositions", "levels")
    raise_on_errors(diags)

    machines: Dict[str, RewardMachine] = {}
    for decl in decls.values():
        if decl.path is None:
            continue
        path = Path(base_dir) / decl.path
        try:
            rm = rm_loader(path)
        except InvalidSpecError as exc:
            diags.extend(exc.diagnostics)
            err(decl, f"machine file {decl.path!r} failed to load", "rm-load")
            continue
        except OSError as exc:
            err(decl, f"cannot read machine file {decl.path!r}: {exc}", "rm-load")
            continue
        if rm.name != decl.name:
            err(decl, f"machine {rm.name!r} does not match proposition"
                f" {decl.name!r}", "rm-name")
        if len(rm.formal_params) != decl.arity:
            err(decl, f"machine {rm.name!r} takes {len(rm.formal_params)} agents,"
                f" proposition {decl.name!r} has arity {decl.arity}", "rm-arity")
        stray = sorted(rm_alphabet(rm) - set(decl.children))
        if stray:
            err(decl, f"machine of {decl.name!r} mentions {', '.join(stray)} outside"
                " its children", "alphabet")
        for trans in rm.transitions:
            for atom in trans.guard.atoms:
                child = decls.get(atom.prop)
                if child is None or atom.params is None:
                    continue
                if len(atom.params) != child.arity:
                    err(decl, f"guard atom {atom} on {rm.origin}:{trans.line} does"
                        f" not match arity {child.arity}", "atom-arity")
        machines[decl.name] = rm
    raise_on_errors(diags)
    if diagnostics is not None:
        diagnostics.extend(diags)

    levels = tuple(
        frozenset(d.name for d in decls.values() if d.level == k)
        for k in range(1, top_level + 1)
    )
    logger.info("Loaded %d-level hierarchy from %s", top_level, origin)
    return PropositionHierarchy(
        levels=levels,
        props={d.name: Proposition(d.name, d.arity) for d in decls.values()},
        children={
            d.name: frozenset(d.children) for d in decls.values() if d.level > 1
        },
        machines=machines,
        origin=origin,
    )


# Grid layouts

Cell = Tuple[int, int]


class Marker(NamedTuple):
    cells: FrozenSet[Cell]
    prop: str


@dataclass(frozen=True)
class GridLayout:
    """Static geometry of a grid world; cells are ``(row, column)`` pairs."""

    width: int
    height: int
    walls: FrozenSet[Cell]
    doors: FrozenSet[Cell]
    markers: Mapping[str, Marker]
    starts: Mapping[int, Cell]
    meta: Mapping[str, str] = field(default_factory=dict)
    origin: str = field(default="<string>", compare=False)

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def props_at(self, cell: Cell) -> FrozenSet[str]:
        return frozenset(m.prop for m in self.markers.values() if cell in m.cells)

    def cells_of(self, prop: str) -> FrozenSet[Cell]:
        cells: Set[Cell] = set()
        for marker in self.markers.values():
            if marker.prop == prop:
                cells |= marker.cells
        return frozenset(cells)

    @property
    def propositions(self) -> Tuple[str, ...]:
        return tuple(sorted({m.prop for m in self.markers.values()}))


def parse_layout(
    in_data: SourceLike, diagnostics: Optional[List[Diagnostic]] = None
) -> GridLayout:
    """Parses an ASCII grid layout.

    The header holds ``#`` comments, ``bind <letter>: <proposition>`` lines and
    free ``key: value`` metadata; the grid starts after a ``grid:`` line.
    Legend: ``#`` wall, ``1``-``9`` agent starts, ``D`` door, ``.`` or space
    free, any other letter a marker bound in the header.

    """
    source = read_source(in_data)
    origin = source.origin
    diags: List[Diagnostic] = []

    binds: Dict[str, Tuple[str, int]] = {}
    meta: Dict[str, str] = {}
    rows: List[Tuple[int, str]] = []
    in_grid = False
    for lineno, raw in enumerate(source.text.splitlines(), start=1):
        if in_grid:
            rows.append((lineno, raw.rstrip("\r\n")))
            continue
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if text == "grid:":
            in_grid = True
        elif (m := _RE_BIND.match(text)) is not None:
            letter = m.group("letter")
            if letter == _DOOR:
                diags.append(error(origin, lineno, _col(raw, letter),
                                   "'D' is reserved for doors", "syntax"))
            binds[letter] = (m.group("prop"), lineno)
        elif (m := _RE_META.match(text)) is not None:
            meta[m.group("key")] = m.group("value").strip()
        else:
            diags.append(error(origin, lineno, _col(raw), f"unrecognised line"
                               f" {text!r}", "syntax"))

    while rows and not rows[-1][1].strip():
        rows.pop()
    if not in_grid or not rows:
        diags.append(error(origin, 1, 1, "missing 'grid:' section", "syntax"))
    raise_on_errors(diags)

    width = len(rows[0][1])
    walls: Set[Cell] = set()
    doors: Set[Cell] = set()
    marks: Dict[str, Set[Cell]] = {}
    starts: Dict[int, Cell] = {}
    unbound: Set[str] = set()
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            diags.append(error(origin, lineno, min(len(row), width) + 1,
                               f"row has {len(row)} cells, expected {width}",
                               "ragged"))
            continue
        for c, ch in enumerate(row):
            cell = (r, c)
            if ch == _WALL:
                walls.add(cell)
            elif ch == _DOOR:
                doors.add(cell)
            elif ch in _FREE:
                pass
            elif ch.isdigit() and ch != "0":
                agent = int(ch)
                if agent in starts:
                    diags.append(error(origin, lineno, c + 1,
                                       f"duplicate agent {agent}", "duplicate-agent"))
                starts[agent] = cell
            elif ch.isalpha() and ch.isascii():
                if ch not in binds:
                    if ch not in unbound:
                        diags.append(error(origin, lineno, c + 1,
                                           f"letter {ch!r} is not bound to a"
                                           " proposition", "unbound-letter"))
                    unbound.add(ch)
                marks.setdefault(ch, set()).add(cell)
            else:
                diags.append(error(origin, lineno, c + 1,
                                   f"unknown cell character {ch!r}", "syntax"))

    if not starts:
        diags.append(error(origin, rows[0][0], 1, "no agent start cells", "agent-ids"))
    elif sorted(starts) != list(range(1, len(starts) + 1)):
        diags.append(error(origin, rows[0][0], 1, "agent IDs must be 1..N without"
                           " gaps", "agent-ids"))
    for letter, (_, lineno) in binds.items():
        if letter not in marks:
            diags.append(warning(origin, lineno, 1, f"letter {letter!r} is bound but"
                                 " not used in the grid", "unused-bind"))
    raise_on_errors(diags)
    for diag in diags:
        logger.warning("%s", diag)
    if diagnostics is not None:
        diagnostics.extend(diags)

    return GridLayout(
        width=width,
        height=len(rows),
        walls=frozenset(walls),
        doors=frozenset(doors),
        markers={
            letter: Marker(frozenset(cells), binds[letter][0])
            for letter, cells in sorted(marks.items())
        },
        starts=dict(sorted(starts.items())),
        meta=meta,
        origin=origin,
    )
