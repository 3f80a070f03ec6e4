"""Lexer, parser, sort classification and serialization round trips."""

import random

import pytest

from objsearch import rules
from objsearch.rules import (
    Arith,
    ArityError,
    Atom,
    Constant,
    DisjunctionError,
    Guard,
    LexError,
    Literal,
    Number,
    ParseError,
    Rule,
    SafetyError,
    Variable,
    parse_program,
    serialize_program,
)

LOCATION_PROGRAM = """
room(lab). room(office).
object(p1).
class(printer).
step(1..2).

is(p1, printer).
holds(in(p1, lab), 1).

holds(exists(C, R), I) :- holds(in(O, R), I), is(O, C).
holds(exists(C1, R), I) :- holds(exists(C2, R), I), subclass(C2, C1).
-holds(in(O, R2), I) :- holds(in(O, R1), I), room(R2), R1 != R2.
holds(in(O, R1), I+1) :- holds(in(O, R1), I), not holds(in(O, R2), I+1),
    room(R2), R1 != R2.
"""

DEFAULTS_PROGRAM = """
wheeled(peoplebot).
humanoid(nao).

robot(X) :- wheeled(X).
robot(X) :- humanoid(X).
-clmbstair(X) :- robot(X), not ab(d_clmbstair(X)).
ab(d_clmbstair(X)) :- humanoid(X).
"""


def test_location_program_sorts():
    prog = parse_program(LOCATION_PROGRAM)
    assert set(prog.sorts) == {"room", "object", "class", "step"}
    assert prog.sorts["room"].values() == ("lab", "office")
    assert prog.sorts["step"].bounds == (1, 2)
    assert prog.sorts["step"].values() == (1, 2)
    assert 1 in prog.sorts["step"]
    assert 3 not in prog.sorts["step"]
    assert "lab" in prog.sorts["room"]


def test_location_program_rules():
    prog = parse_program(LOCATION_PROGRAM)
    # 2 facts plus 4 rules survive classification
    facts = [r for r in prog.rules if not r.body]
    proper = [r for r in prog.rules if r.body]
    assert len(facts) == 2
    assert len(proper) == 4
    inertia = proper[-1]
    assert inertia.head.atom.name == "holds"
    nested = inertia.head.atom.args[0]
    assert isinstance(nested, Atom) and nested.name == "in"
    assert isinstance(inertia.head.atom.args[1], Arith)
    assert any(isinstance(b, Literal) and b.naf for b in inertia.body)
    assert any(isinstance(b, Guard) for b in inertia.body)


def test_sort_guard_literal_kept_in_body():
    prog = parse_program(LOCATION_PROGRAM)
    exclusive = [r for r in prog.rules if r.head is not None and r.head.neg][0]
    guard_lits = [
        b for b in exclusive.body
        if isinstance(b, Literal) and b.atom.name == "room"
    ]
    assert len(guard_lits) == 1


def test_defaults_program_classification():
    prog = parse_program(DEFAULTS_PROGRAM)
    # unary predicates only used as bodyless constant facts become sorts
    assert set(prog.sorts) == {"wheeled", "humanoid"}
    heads = {r.head.atom.name for r in prog.rules if r.head is not None}
    assert heads == {"robot", "clmbstair", "ab"}


def test_head_predicate_not_a_sort():
    # robot(X) appears as a rule head, so robot(foo). must stay a fact
    prog = parse_program("robot(foo).\nrobot(X) :- wheeled(X).\nwheeled(w1).")
    assert set(prog.sorts) == {"wheeled"}
    facts = [r for r in prog.rules if not r.body]
    assert len(facts) == 1
    assert facts[0].head.atom.name == "robot"


def test_negated_predicate_not_a_sort():
    prog = parse_program("p(a).\nq(b).\nr(X) :- q(X), not p(X).")
    assert set(prog.sorts) == {"q"}


def test_classical_negation_and_naf_literals():
    prog = parse_program("q(a).\np(X) :- q(X), not -p(X).")
    rule = [r for r in prog.rules if r.body][0]
    naf = [b for b in rule.body if isinstance(b, Literal) and b.naf][0]
    assert naf.neg
    assert naf.atom == Atom("p", (Variable("X"),))


def test_constraint_statement():
    prog = parse_program("p(a).\nq(a).\n:- p(X), q(X).")
    constraint = [r for r in prog.rules if r.head is None]
    assert len(constraint) == 1
    assert len(constraint[0].body) == 2


def test_range_declaration_merging():
    prog = parse_program("step(1..3).\nfoo(step1).\nbar(X) :- foo(X).")
    assert prog.sorts["step"].values() == (1, 2, 3)


def test_conflicting_range_declarations():
    with pytest.raises(ParseError):
        parse_program("step(1..3). step(1..4).")


def test_empty_range_rejected():
    with pytest.raises(ParseError):
        parse_program("step(5..2).")


def test_range_and_constant_sort_conflict():
    with pytest.raises((ParseError, ArityError)):
        parse_program("step(1..3). step(extra).")


def test_unsafe_rule_rejected():
    with pytest.raises(SafetyError):
        parse_program("q(a).\np(X) :- q(Y).")


def test_unsafe_naf_only_rejected():
    # a head variable bound only through negation is unsafe
    with pytest.raises(SafetyError):
        parse_program("q(a).\np(X) :- not q(X).")


def test_variable_fact_rejected():
    with pytest.raises(SafetyError):
        parse_program("p(X).")


def test_arity_conflict():
    with pytest.raises(ArityError):
        parse_program("p(a).\np(a, b).")


def test_disjunction_rejected():
    with pytest.raises(DisjunctionError):
        parse_program("p(a) or -p(a).")


def test_naf_in_head_rejected():
    with pytest.raises(ParseError):
        parse_program("not p(a).")


def test_deep_nesting_rejected():
    with pytest.raises(ParseError):
        parse_program("holds(in(box(a), lab), 1).")


def test_single_nesting_allowed():
    prog = parse_program("holds(in(a, lab), 1). step(1..2).")
    fact = [r for r in prog.rules if r.head is not None][0]
    inner = fact.head.atom.args[0]
    assert isinstance(inner, Atom)
    assert inner.args == (Constant("a"), Constant("lab"))


def test_long_identifier_rejected():
    name = "x" * 65
    with pytest.raises(LexError):
        parse_program(f"p({name}).")


def test_lex_error_position():
    with pytest.raises(LexError) as err:
        parse_program("p(a).\nq(@).")
    assert "line 2" in str(err.value)


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse_program("p(a) :- .")
    assert "line 1" in str(err.value)


def test_bang_requires_equals():
    with pytest.raises(LexError):
        parse_program("p(X) :- q(X), X ! a.")


def test_comments_and_whitespace():
    prog = parse_program("% header\np(a, b). % trailing\n\n% tail\n")
    assert len(prog.rules) == 1


def test_guard_requires_inequality():
    prog = parse_program("q(a). q(b).\np(X, Y) :- q(X), q(Y), X != Y.")
    rule = [r for r in prog.rules if r.body][0]
    guards = [b for b in rule.body if isinstance(b, Guard)]
    assert len(guards) == 1
    assert str(guards[0]) == "X != Y"


def test_arith_terms():
    prog = parse_program("step(1..3).\nnum(n0).\nf(X, I+1) :- f(X, I), num(X).")
    rule = [r for r in prog.rules if r.body][0]
    arg = rule.head.atom.args[1]
    assert arg == Arith("I", 1)
    assert str(arg) == "I+1"
    prog2 = parse_program("step(1..3).\nnum(n0).\ng(X, I-1) :- g(X, I), num(X).")
    rule2 = [r for r in prog2.rules if r.body][0]
    assert rule2.head.atom.args[1] == Arith("I", -1)


def test_roundtrip_fixture_programs():
    for text in (LOCATION_PROGRAM, DEFAULTS_PROGRAM):
        prog = parse_program(text)
        out = serialize_program(prog)
        again = parse_program(out)
        assert again == prog
        assert serialize_program(again) == out


def test_roundtrip_random_programs():
    rng = random.Random(20240817)
    consts = ["a", "b", "c", "d"]
    for _ in range(50):
        lines = ["dom(%s)." % c for c in consts]
        preds = ["p", "q", "r"]
        for _ in range(rng.randrange(1, 6)):
            head = "%s(%s)" % (rng.choice(preds), rng.choice(["X", "Y"]))
            var = head[head.index("(") + 1:-1]
            body = ["dom(%s)" % var]
            for _ in range(rng.randrange(0, 3)):
                marker = rng.choice(["", "-", "not "])
                body.append("%s%s(%s)" % (marker, rng.choice(preds), rng.choice(consts + [var])))
            lines.append("%s :- %s." % (head, ", ".join(body)))
        text = "\n".join(lines)
        prog = parse_program(text)
        out = serialize_program(prog)
        assert parse_program(out) == prog


def test_parse_determinism():
    a = serialize_program(parse_program(LOCATION_PROGRAM))
    b = serialize_program(parse_program(LOCATION_PROGRAM))
    assert a == b


def test_load_program(tmp_path):
    path = tmp_path / "prog.kb"
    path.write_text(LOCATION_PROGRAM, encoding="utf-8")
    prog = rules.load_program(path)
    assert set(prog.sorts) == {"room", "object", "class", "step"}


def test_literal_complement():
    lit = Literal(Atom("p", (Constant("a"),)))
    comp = lit.complement()
    assert comp.neg and comp.atom == lit.atom
    assert comp.complement() == lit


def test_str_forms():
    prog = parse_program(LOCATION_PROGRAM)
    inertia = [r for r in prog.rules if r.body][-1]
    text = str(inertia)
    assert text.startswith("holds(in(O, R1), I+1) :- ")
    assert "not holds(in(O, R2), I+1)" in text
    assert text.endswith("R1 != R2.")
