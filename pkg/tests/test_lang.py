"""reward machine, hierarchy and layout parser tests"""

# SPDX-License-Identifier: BSD-3-Clause

import re
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from hrmarl.diagnostics import InvalidSpecError
from hrmarl.lang import (
    CycleError,
    RmSpecSource,
    count_accepting_paths,
    parse_hierarchy,
    parse_layout,
    parse_rm,
    serialize_rm,
)
from hrmarl.machine import Proposition, primitive_machine
from .utils import get_asset_path, get_test_path

BUNDLED_RMS = [
    ("pass", "team.rm"),
    ("pass", "ab_c_a.rm"),
    ("pass", "ab_c_b.rm"),
    ("pass", "ab_d_a.rm"),
    ("pass", "ab_d_b.rm"),
    ("pass", "flat_team.rm"),
    ("minecraft", "flat_team.rm"),
    ("navigation", "n2", "flat_team.rm"),
    ("navigation", "n3", "flat_team.rm"),
    ("navigation", "n5", "flat_team.rm"),
]

HEADER = "rm f(i)\nstates: u0 u1\ninit: u0\nterminal: u1\n"


def rm_source(text):
    return RmSpecSource(text, "case.rm")


def parse_errors(text):
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_rm(rm_source(text))
    return excinfo.value


@pytest.fixture(scope="module")
def flat_pass():
    return parse_rm(get_asset_path("pass", "flat_team.rm"))


def test_pass_team_rm():
    rm = parse_rm(get_asset_path("pass", "team.rm"))
    assert rm.name == "team"
    assert rm.formal_params == ("i", "j", "k")
    assert len(rm.states) == 2
    assert len(rm.transitions) == 4
    assert all(t.target in rm.terminals for t in rm.transitions)
    assert all(a.is_wildcard for t in rm.transitions for a in t.guard.atoms)


def test_flat_pass_rm(flat_pass):
    assert len(flat_pass.states) == 32
    assert flat_pass.initial == "u0"
    assert flat_pass.terminals == {"u31"}
    assert count_accepting_paths(flat_pass) == 24


def test_flat_pass_rm_serialized_states(flat_pass):
    states_line = serialize_rm(flat_pass).splitlines()[1]
    assert len(states_line.split(":")[1].split()) == 32


@pytest.mark.parametrize(
    "rm_file, exp",
    [
        (("minecraft", "flat_team.rm"), 4),
        (("pass", "team.rm"), 4),
        (("pass", "ab_d_b.rm"), 1),
        (("navigation", "n5", "flat_team.rm"), 1),
    ],
)
def test_count_accepting_paths(rm_file, exp):
    assert count_accepting_paths(parse_rm(get_asset_path(*rm_file))) == exp


def test_count_accepting_paths_primitive():
    assert count_accepting_paths(primitive_machine(Proposition("a", 1))) == 1


def test_count_accepting_paths_cycle():
    rm = parse_rm(get_test_path("cyclic.rm"))
    with pytest.raises(CycleError):
        count_accepting_paths(rm)


def test_two_line_machine_matches_primitive():
    rm = parse_rm(rm_source(HEADER + "u0 -> u1 : a(i)\n"))
    prim = primitive_machine(Proposition("a", 1))
    assert rm.formal_params == prim.formal_params
    assert rm.states == prim.states
    assert rm.terminals == prim.terminals
    assert rm.transitions == prim.transitions


def test_serialize_primitive_single_transition_line():
    text = serialize_rm(primitive_machine(Proposition("a", 1)))
    assert [line for line in text.splitlines() if "->" in line] == [
        "u0 -> u1 : a(i)"
    ]


@pytest.mark.parametrize("rm_file", BUNDLED_RMS)
def test_serialize_reparses_equal(rm_file):
    rm = parse_rm(get_asset_path(*rm_file))
    assert parse_rm(rm_source(serialize_rm(rm))) == rm


def test_serialize_keeps_rewards():
    rm = parse_rm(rm_source(HEADER + "u0 -> u1 : a(i) => 2.5\n"))
    assert parse_rm(rm_source(serialize_rm(rm))).transitions[0].reward == 2.5


_ATOM_POOL = ["a(i)", "a(j)", "b(i,j)", "b(j,i)", "c(*)"]


@st.composite
def machine_texts(draw):
    """Valid machines over ``(i, j)`` with up to eight states.

    Every state past ``u0`` gets an edge from an earlier state, so all are
    reachable; states without outgoing edges are the terminals.

    """
    n = draw(st.integers(2, 8))
    edges = [(draw(st.integers(0, k - 1)), k) for k in range(1, n)]
    extra = draw(
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4)
    )
    edges += [(src, dst) for src, dst in extra if src < dst]
    sources = {src for src, _ in edges}
    lines = [
        "rm rand(i,j)",
        "states: " + " ".join(f"u{k}" for k in range(n)),
        "init: u0",
        "terminal: " + " ".join(f"u{k}" for k in range(n) if k not in sources),
    ]
    for src, dst in edges:
        atoms = draw(
            st.lists(st.sampled_from(_ATOM_POOL), min_size=1, max_size=3, unique=True)
        )
        reward = draw(st.sampled_from(["", " => 0.5", " => 2", " => -1.5"]))
        lines.append(f"u{src} -> u{dst} : {' & '.join(atoms)}{reward}")
    return "\n".join(lines) + "\n"


@settings(max_examples=100, deadline=None)
@given(machine_texts())
def test_serialize_reparses_generated_machines(text):
    rm = parse_rm(rm_source(text))
    assert parse_rm(rm_source(serialize_rm(rm))) == rm


def _break_rule(text, rule):
    rm = parse_rm(rm_source(text))
    guard = rm.transitions[0].guard
    terminal = sorted(rm.terminals)[0]
    if rule == "unreachable-state":
        return re.sub(r"^states:(.*)$", r"states:\1 orphan", text, count=1,
                      flags=re.MULTILINE)
    extra = {
        "self-loop": f"{rm.initial} -> {rm.initial} : {guard}",
        "terminal-exit": f"{terminal} -> {rm.initial} : {guard}",
        "unknown-state": f"{rm.initial} -> nowhere : {guard}",
        "undeclared-parameter": f"{rm.initial} -> {terminal} : zz(q)",
    }[rule]
    return text.rstrip("\n") + "\n" + extra + "\n"


@pytest.mark.parametrize("rm_file", BUNDLED_RMS)
@pytest.mark.parametrize(
    "rule",
    [
        "self-loop",
        "terminal-exit",
        "unknown-state",
        "undeclared-parameter",
        "unreachable-state",
    ],
)
def test_one_broken_rule_one_error_class(rm_file, rule):
    text = Path(get_asset_path(*rm_file)).read_text()
    assert parse_errors(_break_rule(text, rule)).codes == [rule]


def test_comments_and_blank_lines():
    text = "# leading comment\n\n" + HEADER + "u0 -> u1 : a(i)  # fires once\n"
    assert len(parse_rm(rm_source(text)).transitions) == 1


@pytest.mark.parametrize(
    "text, code",
    [
        ("states: u0 u1\ninit: u0\nterminal: u1\nu0 -> u1 : a(i)\n", "syntax"),
        (HEADER + "u0 -> u1 : a(j)\n", "undeclared-parameter"),
        (HEADER + "u0 -> u1 : a(i\n", "syntax"),
        (HEADER + "u0 -> u1 : a(i,*)\n", "syntax"),
        (HEADER + "u0 -> u2 : a(i)\n", "unknown-state"),
        ("rm f(i)\nstates: u0 u1\ninit: u9\nterminal: u1\nu0 -> u1 : a(i)\n",
         "unknown-state"),
        (HEADER + "u0 -> u0 : a(i)\nu0 -> u1 : b(i)\n", "self-loop"),
        (HEADER + "u0 -> u1 : a(i)\nu1 -> u0 : b(i)\n", "terminal-exit"),
        ("rm f(i,j)\nstates: u0 u1 u2\ninit: u0\nterminal: u2\n"
         "u0 -> u1 : a(i)\nu1 -> u2 : a(i,j)\n", "atom-arity"),
        (HEADER, "empty-machine"),
        ("rm f(i)\nstates: u0 u1 u2\ninit: u0\nterminal: u1\nu0 -> u1 : a(i)\n",
         "unreachable-state"),
    ],
)
def test_parse_rm_error_codes(text, code):
    assert parse_errors(text).codes == [code]


def test_diagnostic_points_at_transition_line():
    exc = parse_errors(HEADER + "\nu0 -> u1 : a(j)\n")
    (diag,) = exc.diagnostics
    assert diag.origin == "case.rm"
    assert diag.line == 6
    assert str(diag).startswith("error:case.rm:6:")


def test_diagnostic_points_at_unreachable_state_declaration():
    exc = parse_errors(
        "rm f(i)\ninit: u0\nterminal: u1\nstates: u0 u1 u2\nu0 -> u1 : a(i)\n"
    )
    assert [d.line for d in exc.diagnostics] == [4]


def test_all_errors_reported_together():
    exc = parse_errors(HEADER + "u0 -> u1 : a(j)\nu0 -> u1 : b(k)\n")
    assert len(exc.diagnostics) == 2


def test_shadowed_transition_warning():
    found = []
    rm = parse_rm(get_test_path("shadowed.rm"), found)
    assert len(rm.transitions) == 2
    assert [(d.severity, d.code, d.line) for d in found] == [
        ("warning", "shadowed", 6)
    ]


def test_broken_rm_file():
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_rm(get_test_path("broken.rm"))
    assert excinfo.value.exit_code == 2
    assert excinfo.value.codes == ["undeclared-parameter"]


LONG_RM = (
    "rm f(i)\nstates: u0 u1 u2\ninit: u0\nterminal: u1 u2\nu0 -> u1 : a(i)\n"
    + "# " + "x" * 300 * 1024 + "\n"
    + "u0 -> u2 : b(i)\n"
)


def test_long_file_read_in_full(tmp_path):
    path = tmp_path / "long.rm"
    path.write_text(LONG_RM)
    rm = parse_rm(path)
    assert len(rm.transitions) == 2
    assert rm == parse_rm(rm_source(LONG_RM))


def test_invalid_utf8_is_located(tmp_path):
    path = tmp_path / "garbled.rm"
    path.write_bytes(b"rm f(i)\nstates: u0 \xff\n")
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_rm(path)
    (diag,) = excinfo.value.diagnostics
    assert (diag.code, diag.line, diag.column) == ("encoding", 2, 12)
    assert diag.origin == str(path)


def test_invalid_utf8_in_open_handle(tmp_path):
    path = tmp_path / "garbled.rm"
    path.write_bytes(b"rm f(i)\n\xfe\n")
    with open(path, encoding="utf-8") as fh:
        with pytest.raises(InvalidSpecError) as excinfo:
            parse_rm(fh)
    assert excinfo.value.codes == ["encoding"]


# Hierarchies

PAIR = "rm pair(i,j)\nstates: u0 u1\ninit: u0\nterminal: u1\nu0 -> u1 : a(i) & b(j)\n"

MACHINES = {
    "pair.rm": PAIR,
    "wide.rm": PAIR.replace("a(i) & b(j)", "a(i,j)"),
    "bad.rm": PAIR.replace("b(j)", "b(k)"),
    "top.rm": "rm top(i,j)\nstates: u0 u1\ninit: u0\nterminal: u1\n"
    "u0 -> u1 : pair(*)\n",
}

PRIMS = "level 1: a(1)\nlevel 1: b(1)\n"


def load_machine(path):
    return parse_rm(RmSpecSource(MACHINES[path.name], path.name))


def hier(text):
    return parse_hierarchy(RmSpecSource(text, "case.hier"), rm_loader=load_machine)


def hier_errors(text):
    with pytest.raises(InvalidSpecError) as excinfo:
        hier(text)
    return excinfo.value


def test_pass_hierarchy():
    h = parse_hierarchy(get_asset_path("pass", "pass.hier"))
    assert h.depth == 3
    assert [len(level) for level in h.levels] == [5, 4, 1]
    assert h.top == "team"
    assert h.n_agents == 3
    assert h.primitives == ("a", "b", "c", "d", "room")
    assert h.children["ab_c_a"] == {"a", "b", "c", "d", "room"}
    assert h.level_of("ab_d_b") == 2


@pytest.mark.parametrize(
    "hier_file, depth, n_agents",
    [
        (("minecraft", "minecraft.hier"), 2, 3),
        (("navigation", "n2", "navigation.hier"), 2, 2),
        (("navigation", "n3", "navigation.hier"), 2, 3),
        (("navigation", "n5", "navigation.hier"), 2, 5),
    ],
)
def test_bundled_hierarchies(hier_file, depth, n_agents):
    h = parse_hierarchy(get_asset_path(*hier_file))
    assert h.depth == depth
    assert h.n_agents == n_agents


def test_two_level_hierarchy():
    h = hier(PRIMS + "level 2: pair(2) {a b} = pair.rm\n")
    assert h.levels == (frozenset({"a", "b"}), frozenset({"pair"}))
    assert h.machine("pair").name == "pair"
    assert h.machine("a") == primitive_machine(Proposition("a", 1))


def test_three_level_hierarchy():
    h = hier(
        PRIMS + "level 2: pair(2) {a b} = pair.rm\nlevel 3: top(2) {pair} = top.rm\n"
    )
    assert h.depth == 3
    assert h.top == "top"


def test_single_level_hierarchy():
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_hierarchy(get_test_path("single.hier"))
    assert excinfo.value.codes == ["levels"]
    assert "K >= 2" in str(excinfo.value.diagnostics[0])


@pytest.mark.parametrize(
    "text, code",
    [
        ("level one: a(1)\n", "syntax"),
        (PRIMS + "level 2: pair(2) = pair.rm\n", "syntax"),
        (PRIMS + "level 1: a(1)\nlevel 2: pair(2) {a b} = pair.rm\n", "duplicate"),
        (PRIMS + "level 2: pair(2) {a b c} = pair.rm\n", "dangling-child"),
        (PRIMS + "level 2: x(2) {y} = pair.rm\nlevel 2: y(2) {x} = pair.rm\n",
         "cycle"),
        (PRIMS + "level 2: pair(2) {a b} = pair.rm\n"
         "level 3: top(2) {pair a} = top.rm\n",
         "cross-level"),
        ("level 1: a(2)\nlevel 1: b(1)\nlevel 2: pair(2) {a b} = pair.rm\n",
         "primitive-arity"),
        (PRIMS + "level 2: pair(2) {a b} = pair.rm\n"
         "level 2: duo(2) {a b} = pair.rm\n",
         "top"),
        (PRIMS + "level 2: duo(2) {a b} = pair.rm\n", "rm-name"),
        (PRIMS + "level 2: pair(3) {a b} = pair.rm\n", "rm-arity"),
        (PRIMS + "level 2: pair(2) {a} = pair.rm\n", "alphabet"),
        (PRIMS + "level 2: pair(2) {a b} = wide.rm\n", "atom-arity"),
    ],
)
def test_hierarchy_error_codes(text, code):
    assert hier_errors(text).codes == [code]


def test_hierarchy_rm_load_error():
    exc = hier_errors(PRIMS + "level 2: pair(2) {a b} = bad.rm\n")
    assert "rm-load" in exc.codes
    assert "undeclared-parameter" in exc.codes


def test_hierarchy_missing_machine_file(tmp_path):
    path = tmp_path / "lone.hier"
    path.write_text(PRIMS + "level 2: pair(2) {a b} = missing.rm\n")
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_hierarchy(path)
    assert excinfo.value.codes == ["rm-load"]


def test_hierarchy_cycle_message():
    exc = hier_errors(
        PRIMS + "level 2: x(2) {y} = pair.rm\nlevel 2: y(2) {x} = pair.rm\n"
    )
    assert "x -> y -> x" in exc.diagnostics[0].message


# Layouts


def test_pass_layout():
    layout = parse_layout(get_asset_path("pass", "pass.layout"))
    assert (layout.width, layout.height) == (9, 7)
    assert layout.doors == {(3, 4)}
    assert layout.n_agents == 3
    assert layout.starts == {1: (2, 1), 2: (3, 1), 3: (4, 1)}
    assert layout.propositions == ("a", "b", "c", "d")
    assert layout.meta == {"room": "room"}
    assert layout.props_at((1, 2)) == {"a"}
    assert layout.cells_of("d") == {(5, 6)}
    left = {c for p in "ab" for c in layout.cells_of(p)}
    right = {c for p in "cd" for c in layout.cells_of(p)}
    assert all(col < 4 for _, col in left)
    assert all(col > 4 for _, col in right)


def test_minimal_layout():
    layout = parse_layout(RmSpecSource("grid:\n1\n"))
    assert (layout.width, layout.height, layout.n_agents) == (1, 1, 1)


def test_layout_unused_bind_warning():
    found = []
    layout = parse_layout(RmSpecSource("bind A: l1\nbind B: l2\ngrid:\n1A\n"), found)
    assert layout.propositions == ("l1",)
    assert [(d.severity, d.code) for d in found] == [("warning", "unused-bind")]


def test_ragged_layout():
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_layout(get_test_path("ragged.layout"))
    assert excinfo.value.codes == ["ragged"]
    assert excinfo.value.diagnostics[0].line == 4


@pytest.mark.parametrize(
    "text, code",
    [
        ("grid:\n1.1\n", "duplicate-agent"),
        ("grid:\n1X\n", "unbound-letter"),
        ("grid:\n1.3\n", "agent-ids"),
        ("grid:\n...\n", "agent-ids"),
        ("bind A: l1\n1A\n", "syntax"),
        ("bind D: door\ngrid:\n1D\n", "syntax"),
        ("grid:\n1?\n", "syntax"),
    ],
)
def test_layout_error_codes(text, code):
    with pytest.raises(InvalidSpecError) as excinfo:
        parse_layout(RmSpecSource(text))
    assert excinfo.value.codes == [code]
