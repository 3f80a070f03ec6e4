"""Brute-force stable model oracle for small ground programs.

Literals are packed into bitmask positions so every candidate set can be
checked exhaustively: the candidate is a stable model when it equals the
least fixpoint of its own reduct. Programs built by random_case are
stratified by construction (negated body literals always sit on a
strictly lower layer than the head), so exactly one stable model exists
and the expected engine outcome is one of model / inconsistent /
constraint.
"""

from dataclasses import dataclass

from objsearch.rules import Atom, Literal, Rule
from objsearch.solver import (
    ConstraintError,
    GroundProgram,
    InconsistentError,
    solve,
)


@dataclass
class Case:
    lits: list            # (name, classically_negated) per bit position
    bit_rules: list       # (head | -1, pos_mask, neg_mask)
    ast_rules: list       # Rule objects for the engine
    pairs: list           # complementary (i, j) bit positions


def least_model(bit_rules, cand: int) -> int:
    model = 0
    changed = True
    while changed:
        changed = False
        for head, pos, neg in bit_rules:
            if head < 0 or neg & cand:
                continue
            if pos & model == pos and not (model >> head) & 1:
                model |= 1 << head
                changed = True
    return model


def stable_models(n_lits: int, bit_rules) -> list:
    return [
        cand for cand in range(1 << n_lits)
        if least_model(bit_rules, cand) == cand
    ]


def satisfies_constraints(cand: int, bit_rules) -> bool:
    for head, pos, neg in bit_rules:
        if head < 0 and pos & cand == pos and not neg & cand:
            return False
    return True


def oracle_outcome(case: Case):
    models = stable_models(len(case.lits), case.bit_rules)
    assert len(models) == 1, "generator must yield stratified programs"
    m = models[0]
    if any((m >> i) & 1 and (m >> j) & 1 for i, j in case.pairs):
        return ("inconsistent", None)
    if not satisfies_constraints(m, case.bit_rules):
        return ("constraint", None)
    return ("model", frozenset(case.lits[i] for i in range(len(case.lits)) if (m >> i) & 1))


def engine_outcome(case: Case):
    gp = GroundProgram.from_ground_rules(case.ast_rules)
    try:
        ans = solve(gp)
    except InconsistentError:
        return ("inconsistent", None)
    except ConstraintError:
        return ("constraint", None)
    found = {(a.name, False) for a in ans.positive}
    found |= {(a.name, True) for a in ans.negative}
    return ("model", frozenset(found))


def random_case(rng) -> Case:
    n_base = rng.choice([2, 3, 3, 4, 4, 4, 5, 5, 6, 7, 8])
    lits = []
    pairs = []
    for k in range(n_base):
        name = f"a{k}"
        lits.append((name, False))
        if rng.random() < 0.3 and len(lits) < 12:
            pairs.append((len(lits) - 1, len(lits)))
            lits.append((name, True))
    index = {lit: i for i, lit in enumerate(lits)}
    level = [rng.randrange(3) for _ in lits]

    bit_rules = []
    ast_rules = []

    def ast_lit(i: int, naf: bool = False) -> Literal:
        name, neg = lits[i]
        return Literal(Atom(name), neg=neg, naf=naf)

    for i in rng.sample(range(len(lits)), k=max(1, round(len(lits) * 0.4))):
        bit_rules.append((i, 0, 0))
        ast_rules.append(Rule(ast_lit(i), ()))

    for _ in range(rng.randrange(2, 9)):
        head = rng.randrange(len(lits))
        lower = [i for i in range(len(lits)) if level[i] < level[head]]
        leq = [i for i in range(len(lits)) if level[i] <= level[head]]
        pos = rng.sample(leq, k=min(len(leq), rng.randrange(0, 3)))
        neg = rng.sample(lower, k=min(len(lower), rng.randrange(0, 3)))
        pos_mask = sum(1 << i for i in set(pos))
        neg_mask = sum(1 << i for i in set(neg))
        bit_rules.append((head, pos_mask, neg_mask))
        body = tuple(ast_lit(i) for i in sorted(set(pos))) + tuple(
            ast_lit(i, naf=True) for i in sorted(set(neg))
        )
        ast_rules.append(Rule(ast_lit(head), body))

    if rng.random() < 0.3:
        pos = rng.sample(range(len(lits)), k=rng.randrange(1, 3))
        neg = rng.sample(range(len(lits)), k=rng.randrange(0, 2))
        neg = [i for i in neg if i not in pos]
        if pos or neg:
            bit_rules.append((-1, sum(1 << i for i in set(pos)), sum(1 << i for i in set(neg))))
            body = tuple(ast_lit(i) for i in sorted(set(pos))) + tuple(
                ast_lit(i, naf=True) for i in sorted(set(neg))
            )
            ast_rules.append(Rule(None, body))

    return Case(lits, bit_rules, ast_rules, pairs)


def run_comparison(rng, count: int) -> int:
    """Check engine vs oracle on count random programs; returns mismatches."""
    bad = 0
    for _ in range(count):
        case = random_case(rng)
        if engine_outcome(case) != oracle_outcome(case):
            bad += 1
    return bad
