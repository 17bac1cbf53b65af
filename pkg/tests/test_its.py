"""Tests for the transition system model, parser, oracle and graph analyses."""

from random import Random

import pytest

from loopbound.expr import AnalysisError, And, Atom, Or, Polynomial, TRUE
from loopbound.its import (GraphAnalysis, IntegerProgram, ParseError,
                           Transition, compose_updates, entry_transitions,
                           graph_analysis, parse_program, print_program,
                           program_to_json, run_oracle, step)

NESTED_SRC = """
# outer loop refills the inner non-linear loop
vars x1 x2 x3 x4 x5 x6
temp y
start l0
t0: l0 -> l1
t1: l1 (x6 >= y && y > 0) -> l2 { x1 := x6; x2 := x6; x3 := 2; x4 := x3; x5 := x6; x6 := x6 - y }
t2: l2 -> l1
t3: l2 (x4^2 - x3^5 < x5 && x4 != 0) -> l2 { x1 := 3*x1 + 2*x2; x2 := -5*x1 - 3*x2; x4 := -2*x4; x5 := 3*x5 + x3^2 }
t4: l1 (x6 <= 0) -> l3 { x6 := x1 }
t5: l3 (x6 > 0) -> l3 { x6 := x6 - 1 }
"""

SELF_LOOP_SRC = """
vars x1 x2 x3 x4 x5
start l0
t0: l0 -> l1
t3: l1 (x4^2 - x3^5 < x5 && x4 != 0) -> l1 { x1 := 3*x1 + 2*x2; x2 := -5*x1 - 3*x2; x4 := -2*x4; x5 := 3*x5 + x3^2 }
"""

TWO_PHASE_SRC = """
vars x1 x2 x3
start l0
t1: l0 -> l1
t2a: l1 (x1 > 0) -> l1 { x1 := x1 - 1; x3 := x3 + x2^2 }
t2b: l1 (x1 > 0) -> l1 { x1 := x1 - 1; x3 := x3 + x2^2 + 1 }
t3: l1 -> l2
t4: l2 (x3 > 0) -> l2 { x3 := x3 - 1 }
"""


@pytest.fixture(scope="module")
def nested():
    return parse_program(NESTED_SRC)


@pytest.fixture(scope="module")
def two_phase():
    return parse_program(TWO_PHASE_SRC)


class TestParsing:
    def test_shape(self, nested):
        assert [t.tid for t in nested.transitions] == ["t0", "t1", "t2", "t3", "t4", "t5"]
        assert nested.variables == ("x1", "x2", "x3", "x4", "x5", "x6")
        assert nested.tempvars == ("y",)
        assert nested.locations == ("l0", "l1", "l2", "l3")
        assert nested.start == "l0"
        assert [t.tid for t in nested.initial] == ["t0"]

    def test_temp_usage(self, nested):
        assert not nested.temp_free(nested.transition("t1"))
        assert nested.temp_free(nested.transition("t3"))

    def test_identity_totalization(self, nested):
        t2 = nested.transition("t2")
        assert t2.guard == TRUE
        assert all(t2.update[v] == Polynomial.var(v) for v in nested.variables)
        t3 = nested.transition("t3")
        assert t3.update["x6"] == Polynomial.var("x6")

    def test_minimal_rule(self):
        p = parse_program("vars x\nstart a\na -> b")
        assert [t.tid for t in p.transitions] == ["t0"]
        assert p.transitions[0].guard == TRUE

    def test_auto_ids_skip_explicit(self):
        p = parse_program("vars x\nstart a\na -> b\nq: b -> c\nc -> d")
        assert [t.tid for t in p.transitions] == ["t0", "q", "t2"]

    def test_comparison_desugaring(self):
        p = parse_program("vars x\nstart a\n"
                          "a (x = 3) -> b\n"
                          "a (x != 3) -> b\n"
                          "a (x <= 3) -> b\n"
                          "a (x < 3) -> b")
        eq, ne, le, lt = (t.guard for t in p.transitions)
        assert isinstance(eq, And) and len(eq.parts) == 2
        assert isinstance(ne, Or) and len(ne.parts) == 2
        assert isinstance(le, Atom) and isinstance(lt, Atom)
        # integer tightening makes <= and < differ by exactly one
        assert le.poly - lt.poly == Polynomial.const(1)

    def test_grouped_guard(self):
        p = parse_program("vars x z\nstart a\na ((x > 0 || z > 0) && x < 9) -> b")
        g = p.transitions[0].guard
        assert isinstance(g, And)
        assert isinstance(g.parts[0], Or)

    def test_parenthesized_polynomial_side(self):
        p = parse_program("vars x\nstart a\na ((x + 1)*2 > 0) -> b")
        g = p.transitions[0].guard
        assert isinstance(g, Atom)
        assert g.poly == Polynomial.var("x") * 2 + 2

    def test_comments_and_layout(self):
        p = parse_program("# header\nvars x  # trailing\nstart a\n\n"
                          "a -> b { x := x + 1 }  # rule\n")
        assert len(p.transitions) == 1


class TestDiagnostics:
    def check(self, src, fragment, line, col):
        with pytest.raises(ParseError) as err:
            parse_program(src)
        assert fragment in err.value.reason
        assert (err.value.line, err.value.col) == (line, col)

    def test_unknown_update_target(self):
        self.check("vars x\nstart a\nt: a -> b { y := 1 }",
                   "unknown program variable", 3, 13)

    def test_temp_update(self):
        self.check("vars x\ntemp y\nstart a\nt: a -> b { y := 1 }",
                   "temporary", 4, 13)

    def test_into_start(self):
        self.check("vars x\nstart a\nt: a -> a", "start location", 3, 9)

    def test_duplicate_id(self):
        self.check("vars x\nstart a\nt: a -> b\nt: b -> c",
                   "duplicate rule id", 4, 1)

    def test_unbound_guard_variable(self):
        self.check("vars x\nstart a\nt: a (z > 0) -> b", "unbound variable", 3, 7)

    def test_missing_start(self):
        self.check("vars x\nt: a -> b", "missing start", 2, 10)

    def test_duplicate_variable(self):
        self.check("vars x x\nstart a", "duplicate variable", 1, 8)

    def test_start_twice(self):
        self.check("vars x\nstart a\nstart b", "already declared", 3, 1)

    def test_empty_comparison_side(self):
        self.check("vars x\nstart a\nt: a (x >) -> b", "expected a polynomial", 3, 10)

    def test_broken_polynomial(self):
        with pytest.raises(ParseError) as err:
            parse_program("vars x\nstart a\nt: a -> b { x := x + }")
        assert (err.value.line, err.value.col) == (3, 18)

    def test_stray_character(self):
        self.check("vars x\nstart a\nt: a (x ! 0) -> b", "unexpected character", 3, 9)

    def test_make_rejects_incoming_start(self):
        t = Transition("t", "a", "s", TRUE, {})
        with pytest.raises(AnalysisError):
            IntegerProgram.make(["x"], [], "s", [t])

    def test_make_rejects_duplicate_ids(self):
        a = Transition("t", "s", "a", TRUE, {})
        b = Transition("t", "a", "b", TRUE, {})
        with pytest.raises(AnalysisError):
            IntegerProgram.make(["x"], [], "s", [a, b])


def _random_source(rng: Random) -> str:
    names = [f"v{i}" for i in range(rng.randint(1, 4))]
    temps = [f"w{i}" for i in range(rng.randint(0, 2))]
    locs = [f"L{i}" for i in range(rng.randint(2, 4))]
    all_names = names + temps

    def poly():
        a, b = rng.choice(all_names), rng.choice(all_names)
        return rng.choice([f"{a} + 1", f"{a} - {b}", f"2*{a} + 3", f"{a}*{b}",
                           f"{a}^2 - {b}", str(rng.randint(-5, 5)), f"-{a}"])

    def guard():
        kind = rng.random()
        if kind < 0.2:
            return ""
        atom = f"{poly()} {rng.choice(['<', '<=', '>', '>=', '=', '!='])} {rng.randint(-3, 3)}"
        if kind < 0.6:
            return f" ({atom})"
        other = f"{rng.choice(all_names)} > 0"
        joiner = rng.choice(["&&", "||"])
        return f" ({atom} {joiner} {other})"

    lines = ["vars " + " ".join(names)]
    if temps:
        lines.append("temp " + " ".join(temps))
    lines.append("start " + locs[0])
    for _ in range(rng.randint(2, 6)):
        src, dst = rng.choice(locs), rng.choice(locs[1:])
        rule = f"{src}{guard()} -> {dst}"
        updated = rng.sample(names, rng.randint(0, len(names)))
        if updated:
            rule += " { " + "; ".join(f"{v} := {poly()}" for v in updated) + " }"
        lines.append(rule)
    return "\n".join(lines)


class TestRoundTrip:
    def test_nested_program(self, nested):
        assert parse_program(print_program(nested)) == nested

    def test_generated_programs(self):
        rng = Random(11)
        for _ in range(40):
            program = parse_program(_random_source(rng))
            again = parse_program(print_program(program))
            assert again == program

    def test_json_shape(self, nested):
        data = program_to_json(nested)
        assert data["start"] == "l0"
        assert data["temp"] == ["y"]
        assert len(data["transitions"]) == 6
        assert data["transitions"][2]["guard"] == "true"


class TestStep:
    def test_full_trace(self, nested):
        t = nested.transition
        cfg = ("l0", {"x1": 6, "x2": 8, "x3": 1, "x4": 6, "x5": 1, "x6": 10})
        cfg = step(cfg, t("t0"))
        assert cfg == ("l1", {"x1": 6, "x2": 8, "x3": 1, "x4": 6, "x5": 1, "x6": 10})
        cfg = step(cfg, t("t1"), {"y": 10})
        assert cfg == ("l2", {"x1": 10, "x2": 10, "x3": 2, "x4": 1, "x5": 10, "x6": 0})
        for _ in range(9):
            cfg = step(cfg, t("t3"))
            assert cfg is not None
        assert cfg == ("l2", {"x1": 50, "x2": -80, "x3": 2, "x4": -512,
                              "x5": 236194, "x6": 0})
        assert step(cfg, t("t3")) is None
        cfg = step(step(cfg, t("t2")), t("t4"))
        assert cfg[0] == "l3" and cfg[1]["x6"] == 50
        fired = 0
        while True:
            nxt = step(cfg, t("t5"))
            if nxt is None:
                break
            cfg, fired = nxt, fired + 1
        assert fired == 50

    def test_guard_rejects(self, nested):
        state = {v: 0 for v in nested.variables}
        assert step(("l1", state), nested.transition("t1"), {"y": 1}) is None

    def test_missing_temp_reads_zero(self, nested):
        state = dict.fromkeys(nested.variables, 0)
        state["x6"] = 5
        # y defaults to 0, so y > 0 fails
        assert step(("l1", state), nested.transition("t1")) is None

    def test_wrong_location(self, nested):
        state = {v: 0 for v in nested.variables}
        with pytest.raises(AnalysisError):
            step(("l3", state), nested.transition("t0"))


class TestOracle:
    def test_outer_counter_reaches_initial_fuel(self, nested):
        rep = run_oracle(nested, {"x6": 10}, step_cap=3000)
        assert rep.counters["t0"] == 1
        assert rep.counters["t1"] == 10
        assert rep.counters["t2"] == 10
        assert rep.counters["t4"] == 1
        assert rep.counters["t5"] >= 10
        assert rep.sizes[("t1", "x1")] == 10
        assert rep.truncated

    def test_self_loop_count(self):
        program = parse_program(SELF_LOOP_SRC)
        rep = run_oracle(program, {"x1": 10, "x2": 10, "x3": 2, "x4": 1, "x5": 10})
        assert rep.counters["t3"] == 9
        assert rep.steps == 10
        assert not rep.truncated
        assert rep.sizes[("t3", "x5")] == 236194

    def test_straight_line(self):
        program = parse_program("vars x\nstart a\nt: a -> b { x := x + 1 }")
        rep = run_oracle(program, {"x": 5})
        assert rep.counters == {"t": 1}
        assert rep.sizes == {("t", "x"): 6}
        assert not rep.truncated

    def test_pumpable_loop_detected(self):
        program = parse_program("vars x\nstart a\nt0: a -> b\nt1: b (x > 0) -> b")
        rep = run_oracle(program, {"x": 3})
        assert rep.pumpable
        assert rep.truncated

    def test_negative_sizes_use_absolute_value(self):
        program = parse_program("vars x\nstart a\nt: a -> b { x := -3*x }")
        rep = run_oracle(program, {"x": 4})
        assert rep.sizes[("t", "x")] == 12

    def test_random_strategy_is_sound(self, nested):
        rep = run_oracle(nested, {"x6": 10}, temp_strategy="random",
                         rng=Random(5), step_cap=2000)
        assert rep.counters["t1"] <= 10
        assert rep.counters["t0"] == 1

    def test_exhaustive_on_bounded_program(self):
        program = parse_program(
            "vars x\ntemp y\nstart a\n"
            "t0: a -> b\nt1: b (x > 0 && y > 0 && y <= x) -> b { x := x - y }")
        rep = run_oracle(program, {"x": 4}, temp_strategy="exhaustive")
        assert rep.counters["t1"] == 4
        assert not rep.truncated

    def test_unknown_strategy(self, nested):
        with pytest.raises(AnalysisError):
            run_oracle(nested, {}, temp_strategy="eager")

    def test_report_json(self, nested):
        data = run_oracle(nested, {"x6": 3}, step_cap=500).to_json()
        assert set(data) == {"counters", "sizes", "steps", "truncated", "pumpable"}
        assert data["counters"]["t0"] == 1


class TestGraph:
    def test_scc_topological_order(self, nested):
        g = graph_analysis(nested)
        assert g.sccs == (frozenset({"l0"}), frozenset({"l1", "l2"}),
                          frozenset({"l3"}))

    def test_components(self, nested):
        g = graph_analysis(nested)
        assert g.components == (frozenset({"t1", "t2", "t3"}), frozenset({"t5"}))

    def test_simple_cycles_skip_temp_updates(self, nested):
        # the t1/t2 alternation is no simple cycle: t1's update reads y
        g = graph_analysis(nested)
        assert g.simple_cycles == (("t3",), ("t5",))

    def test_entry_transitions(self, nested):
        assert entry_transitions(nested, {"t3"}) == ("t1",)
        assert entry_transitions(nested, {"t5"}) == ("t4",)
        assert entry_transitions(nested, {"t1", "t2", "t3"}) == ("t0",)

    def test_commuting_family(self, two_phase):
        g = graph_analysis(two_phase)
        assert g.commuting_families == (("l1", (("t2a",), ("t2b",))),)

    def test_non_commuting_pair_rejected(self):
        program = parse_program(
            "vars x1 x2\nstart l0\nt1: l0 -> l1\n"
            "a: l1 (x1 > 0) -> l1 { x1 := x1 - 1; x2 := x2 + x1 }\n"
            "b: l1 (x1 > 0) -> l1 { x2 := 2*x2 }")
        assert graph_analysis(program).commuting_families == ()

    def test_longer_cycle_in_family(self):
        program = parse_program(
            "vars u v\nstart s\ni: s -> p\n"
            "c1: p (u > 0) -> q { u := u - 1 }\n"
            "c2: q -> p { v := v + 1 }\n"
            "c3: p (v > 5) -> p { v := v - 1 }")
        g = graph_analysis(program)
        assert g.simple_cycles == (("c1", "c2"), ("c3",))
        assert g.commuting_families == (("p", (("c1", "c2"), ("c3",))),)

    def test_family_needs_entries_into_shared_location(self):
        # the entry lands at q, not at the shared location p
        program = parse_program(
            "vars u v\nstart s\ni: s -> q\n"
            "c1: p (u > 0) -> q { u := u - 1 }\n"
            "c2: q -> p { v := v + 1 }\n"
            "c3: p (v > 5) -> p { v := v - 1 }")
        assert graph_analysis(program).commuting_families == ()

    def test_compose_updates_order(self):
        x = Polynomial.var("x")
        double = {"x": x * 2}
        shift = {"x": x + 1}
        assert compose_updates([double, shift])["x"] == x * 2 + 1
        assert compose_updates([shift, double])["x"] == (x + 1) * 2
