"""Grounding and stratified model computation for parsed rule programs.

Grounding is eager: every rule is instantiated over full sort-respecting
substitutions. Sort guards, inequality guards and out-of-range step
arithmetic are resolved at grounding time, so ground rules contain only
plain literals. Solving prunes rules whose positive bodies can never
derive, then requires the remaining ground dependency graph to be
stratified w.r.t. default negation and evaluates stratum by stratum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .rules import (
    Arith,
    Atom,
    Constant,
    Guard,
    Literal,
    Number,
    Program,
    Rule,
    Sort,
    Variable,
    atom_terms,
    match,
    substitute,
)


# ---------------------------------------------------------------------------
# errors

class EngineError(Exception):
    pass


class GroundingError(EngineError):
    pass


class UnsortedConstantError(GroundingError):
    """A constant in a rule does not belong to any declared sort."""


class StepRangeError(GroundingError):
    """Integer arithmetic or integer constants without an integer range sort."""


class SortResolutionError(GroundingError):
    """No domain could be determined for a rule variable."""


class NonStratifiedError(EngineError):
    """The ground program has a cycle through default negation."""

    def __init__(self, predicates):
        self.predicates = frozenset(predicates)
        super().__init__(f"negation cycle through {sorted(self.predicates)}")


class InconsistentError(EngineError):
    """Both an atom and its classical negation were derived."""

    def __init__(self, literal: Literal, complement: Literal):
        self.pair = (literal, complement)
        super().__init__(f"derived both {literal} and {complement}")


class ConstraintError(EngineError):
    """A ground constraint body is satisfied by the model."""

    def __init__(self, body):
        self.body = tuple(body)
        super().__init__("constraint violated: :- " + ", ".join(str(b) for b in self.body))


# ---------------------------------------------------------------------------
# ground program

@dataclass(frozen=True)
class GroundRule:
    head: int  # literal id, or -1 for a constraint
    pos: tuple
    neg: tuple


class GroundProgram:
    """Interned ground rules plus indexes used by solve()."""

    def __init__(self):
        self.literals: list[Literal] = []
        self._ids: dict[Literal, int] = {}
        self.complement: list[int] = []
        self.rules: list[GroundRule] = []
        self.facts: list[int] = []
        self._rule_keys: set = set()
        self.pos_index: dict[int, list[int]] = {}
        self.pred_edges: set = set()  # (head_pred, body_pred, through_negation)

    def intern(self, literal: Literal) -> int:
        lid = self._ids.get(literal)
        if lid is not None:
            return lid
        lid = len(self.literals)
        self.literals.append(literal)
        self._ids[literal] = lid
        self.complement.append(-1)
        comp = self._ids.get(literal.complement())
        if comp is not None:
            self.complement[lid] = comp
            self.complement[comp] = lid
        return lid

    def add_fact(self, literal: Literal) -> None:
        lid = self.intern(literal)
        if ("__fact__", lid) not in self._rule_keys:
            self._rule_keys.add(("__fact__", lid))
            self.facts.append(lid)

    def add_rule(self, head: Literal | None, pos, neg) -> None:
        if head is not None and not pos and not neg:
            self.add_fact(head)
            return
        head_id = -1 if head is None else self.intern(head)
        pos_ids = tuple(self.intern(l) for l in pos)
        neg_ids = tuple(self.intern(l) for l in neg)
        key = (head_id, pos_ids, neg_ids)
        if key in self._rule_keys:
            return
        self._rule_keys.add(key)
        idx = len(self.rules)
        self.rules.append(GroundRule(head_id, pos_ids, neg_ids))
        for lid in set(pos_ids):
            self.pos_index.setdefault(lid, []).append(idx)

    @classmethod
    def from_ground_rules(cls, rules) -> "GroundProgram":
        """Build directly from ground Rule objects (used by tests and tools)."""
        gp = cls()
        for rule in rules:
            pos = [b for b in rule.body if isinstance(b, Literal) and not b.naf]
            neg = [Literal(b.atom, neg=b.neg) for b in rule.body if isinstance(b, Literal) and b.naf]
            gp.add_rule(rule.head, pos, neg)
            gp.pred_edges |= _rule_pred_edges(rule)
        return gp

    @property
    def atom_count(self) -> int:
        return len(self.literals)

    def __len__(self) -> int:
        return len(self.rules) + len(self.facts)


def _rule_pred_edges(rule: Rule) -> set:
    edges = set()
    if rule.head is None:
        return edges
    for elem in rule.body:
        if isinstance(elem, Literal):
            edges.add((rule.head.atom.name, elem.atom.name, elem.naf))
    return edges


# ---------------------------------------------------------------------------
# sort-aware grounding

def _wrap(value) -> Constant | Number:
    return Number(value) if isinstance(value, int) else Constant(value)


class _Domains:
    """Resolves a domain of ground values for every variable of a rule."""

    def __init__(self, program: Program, signature: dict | None):
        self.sorts = program.sorts
        self.range_sorts = [s for s in self.sorts.values() if s.bounds is not None]
        self.universe = tuple(
            dict.fromkeys(v for s in self.sorts.values() for v in s.values())
        )
        self.value_sorts: dict = {}
        for sort in self.sorts.values():
            for v in sort.values():
                self.value_sorts.setdefault(v, []).append(sort.name)
        self.slot_sort: dict = {}
        self.locked: set = set()
        self.conflicted: set = set()
        if signature:
            for name, entry in signature.items():
                for i, sort_name in enumerate(entry):
                    if sort_name is not None:
                        if sort_name not in self.sorts:
                            raise GroundingError(f"signature names unknown sort {sort_name}")
                        self.slot_sort[(name, i)] = sort_name
                        self.locked.add((name, i))
        self._observe(program)
        self._propagate(program)

    def _smallest(self, names) -> str:
        return min(names, key=lambda n: (len(self.sorts[n].values()), n))

    def _observe(self, program: Program) -> None:
        observed: dict = {}
        for rule in program.rules:
            for atom in _rule_atoms(rule):
                for path, term in atom_terms(atom):
                    slot = path[-1]
                    if isinstance(term, Constant):
                        observed.setdefault(slot, set()).add(term.name)
                    elif isinstance(term, Number):
                        observed.setdefault(slot, set()).add(term.value)
        for slot, values in observed.items():
            if slot in self.locked:
                continue
            covering = [
                name for name, sort in self.sorts.items()
                if all(v in sort for v in values)
            ]
            if covering:
                self.slot_sort[slot] = self._smallest(covering)

    def _propagate(self, program: Program) -> None:
        # variables tie slots together across rules; push known slot sorts
        # through until a fixpoint, demoting slots with conflicting claims
        for _ in range(len(self.sorts) + len(program.rules) + 2):
            changed = False
            for rule in program.rules:
                for var, slots in _variable_slots(rule).items():
                    known = {
                        self.slot_sort[s] for s in slots
                        if s in self.slot_sort
                    }
                    if not known:
                        continue
                    var_sort = self._smallest(known)
                    for s in slots:
                        if s in self.slot_sort or s in self.conflicted or s in self.locked:
                            continue
                        self.slot_sort[s] = var_sort
                        changed = True
            if not changed:
                return

    def domain(self, rule: Rule, var: str, slots, guard_sorts, arith_vars):
        if guard_sorts:
            values = set(self.sorts[guard_sorts[0]].values())
            for name in guard_sorts[1:]:
                values &= set(self.sorts[name].values())
            return tuple(sorted(values, key=str))
        names = {self.slot_sort[s] for s in slots if s in self.slot_sort}
        if names:
            if len(names) == 1:
                return self.sorts[names.pop()].values()
            values = set(self.sorts[names.pop()].values())
            for name in names:
                values &= set(self.sorts[name].values())
            if not values:
                raise SortResolutionError(f"conflicting sorts for variable {var} in {rule}")
            return tuple(sorted(values, key=str))
        if var in arith_vars:
            if len(self.range_sorts) == 1:
                return self.range_sorts[0].values()
            raise StepRangeError(
                f"variable {var} in {rule} needs an integer range sort"
            )
        if not self.universe:
            raise SortResolutionError(f"no domain for variable {var} in {rule}")
        return self.universe


def _rule_atoms(rule: Rule):
    if rule.head is not None:
        yield rule.head.atom
    for elem in rule.body:
        if isinstance(elem, Literal):
            yield elem.atom
        else:
            for side in (elem.left, elem.right):
                if isinstance(side, Atom):
                    yield side


def _variable_slots(rule: Rule) -> dict:
    slots: dict = {}
    for atom in _rule_atoms(rule):
        for path, term in atom_terms(atom):
            if isinstance(term, Variable):
                slots.setdefault(term.name, set()).add(path[-1])
            elif isinstance(term, Arith):
                slots.setdefault(term.var, set()).add(path[-1])
    return slots


def _arith_vars(rule: Rule) -> set:
    out = set()
    for atom in _rule_atoms(rule):
        for _, term in atom_terms(atom):
            if isinstance(term, Arith):
                out.add(term.var)
    return out


def _check_constants(program: Program) -> None:
    has_range = any(s.bounds is not None for s in program.sorts.values())
    for rule in program.rules:
        for atom in _rule_atoms(rule):
            for _, term in atom_terms(atom):
                if isinstance(term, Constant):
                    if not any(term.name in s for s in program.sorts.values()):
                        raise UnsortedConstantError(
                            f"constant {term.name} in {rule} is not in any sort"
                        )
                elif isinstance(term, Number):
                    if not has_range:
                        raise StepRangeError(
                            f"integer {term.value} in {rule} but no integer range sort declared"
                        )
                    if not any(term.value in s for s in program.sorts.values()):
                        raise UnsortedConstantError(
                            f"integer {term.value} in {rule} is outside every range sort"
                        )
        if _arith_vars(rule) and not has_range:
            raise StepRangeError(f"step arithmetic in {rule} but no integer range sort declared")


def _ground_value(term, binding: dict):
    """Substituted guard operand to a comparable python value."""
    if isinstance(term, Variable):
        term = binding[term.name]
    elif isinstance(term, Arith):
        base = binding[term.var]
        if not isinstance(base, Number):
            raise SortResolutionError(f"arithmetic over non-integer value {base}")
        return base.value + term.offset
    if isinstance(term, Constant):
        return term.name
    if isinstance(term, Number):
        return term.value
    if isinstance(term, Atom):
        return substitute(term, binding)
    raise SortResolutionError(f"unbound guard term {term}")


def ground(program: Program, signature: dict | None = None) -> GroundProgram:
    """Instantiate every rule over sort-respecting substitutions.

    signature optionally maps functor name -> tuple of sort names (None
    entries left to inference), e.g. {"in": ("object", "room")}.
    """
    _check_constants(program)
    domains = _Domains(program, signature)
    gp = GroundProgram()

    for rule in program.rules:
        gp.pred_edges |= _rule_pred_edges(rule)
        var_slots = _variable_slots(rule)
        arith = _arith_vars(rule)

        sort_guards: list = []   # (sort_name, term, neg, naf)
        plain_body: list = []
        guard_sorts_by_var: dict = {}
        for elem in rule.body:
            if isinstance(elem, Literal) and len(elem.atom.args) == 1 and elem.atom.name in program.sorts:
                arg = elem.atom.args[0]
                sort_guards.append((elem.atom.name, arg, elem.neg, elem.naf))
                if isinstance(arg, Variable) and not elem.neg and not elem.naf:
                    guard_sorts_by_var.setdefault(arg.name, []).append(elem.atom.name)
            else:
                plain_body.append(elem)

        names = sorted(var_slots)
        value_sets = [
            [
                _wrap(v)
                for v in domains.domain(
                    rule, name, var_slots[name], guard_sorts_by_var.get(name, []), arith
                )
            ]
            for name in names
        ]
        for combo in itertools.product(*value_sets):
            binding = dict(zip(names, combo))
            ok = True
            # inequality guards
            for elem in plain_body:
                if isinstance(elem, Guard):
                    if _ground_value(elem.left, binding) == _ground_value(elem.right, binding):
                        ok = False
                        break
            if not ok:
                continue
            # sort membership guards
            for sort_name, arg, neg, naf in sort_guards:
                value = _ground_value(arg, binding)
                member = value in program.sorts[sort_name] and not neg
                if member == naf:
                    ok = False
                    break
            if not ok:
                continue
            # step arithmetic must stay inside the declared range
            try:
                head = None if rule.head is None else Literal(
                    substitute(rule.head.atom, binding), neg=rule.head.neg
                )
                pos = []
                neg_lits = []
                for elem in plain_body:
                    if isinstance(elem, Guard):
                        continue
                    lit = Literal(substitute(elem.atom, binding), neg=elem.neg)
                    (neg_lits if elem.naf else pos).append(lit)
            except ValueError:
                continue
            if not _in_range(head, pos, neg_lits, domains):
                continue
            gp.add_rule(head, pos, neg_lits)
    return gp


def _in_range(head, pos, neg, domains) -> bool:
    """Reject instances whose evaluated integers left every range sort."""
    if not domains.range_sorts:
        return True
    for lit in itertools.chain([] if head is None else [head], pos, neg):
        for _, term in atom_terms(lit.atom):
            if isinstance(term, Number):
                if not any(term.value in s for s in domains.range_sorts):
                    return False
    return True


# ---------------------------------------------------------------------------
# answer sets

@dataclass(frozen=True)
class AnswerSet:
    """Positive atoms and classically negated atoms of the unique model."""

    positive: frozenset
    negative: frozenset

    def __contains__(self, item) -> bool:
        if isinstance(item, Literal):
            return item.atom in (self.negative if item.neg else self.positive)
        return item in self.positive

    def matches(self, pattern: Literal | Atom) -> set:
        """Ground literals in the model unifying with the pattern."""
        if isinstance(pattern, Atom):
            pattern = Literal(pattern)
        pool = self.negative if pattern.neg else self.positive
        out = set()
        for atom in pool:
            if match(pattern.atom, atom) is not None:
                out.add(Literal(atom, neg=pattern.neg))
        return out

    def to_text(self) -> str:
        lits = sorted(
            [str(Literal(a)) for a in self.positive]
            + [str(Literal(a, neg=True)) for a in self.negative]
        )
        return "\n".join(f"{l}." for l in lits) + ("\n" if lits else "")


def solve(gp: GroundProgram, extra_facts=()) -> AnswerSet:
    """Stratified evaluation of a ground program plus runtime facts."""
    fact_ids = list(gp.facts)
    for lit in extra_facts:
        fact_ids.append(gp.intern(lit))

    n = len(gp.literals)
    possible = bytearray(n)
    remaining = [len(r.pos) for r in gp.rules]
    live: list[int] = []
    queue: list[int] = []

    def mark(lid: int) -> None:
        if not possible[lid]:
            possible[lid] = 1
            queue.append(lid)

    for ri, rule in enumerate(gp.rules):
        if remaining[ri] == 0:
            live.append(ri)
            if rule.head >= 0:
                mark(rule.head)
    for lid in fact_ids:
        mark(lid)
    while queue:
        lid = queue.pop()
        for ri in gp.pos_index.get(lid, ()):
            remaining[ri] -= 1
            if remaining[ri] == 0:
                live.append(ri)
                head = gp.rules[ri].head
                if head >= 0:
                    mark(head)

    # dependency edges among possibly-derivable atoms; negation edges only
    # survive when the negated atom itself is possibly derivable
    edges: dict[int, list] = {}
    neg_pairs: list = []
    live_rules = []
    for ri in live:
        rule = gp.rules[ri]
        kept_neg = tuple(m for m in rule.neg if possible[m])
        live_rules.append((rule.head, rule.pos, kept_neg))
        if rule.head < 0:
            continue
        for b in rule.pos:
            edges.setdefault(b, []).append(rule.head)
        for m in kept_neg:
            edges.setdefault(m, []).append(rule.head)
            neg_pairs.append((m, rule.head))

    comp = _scc([i for i in range(n) if possible[i]], edges)
    for m, h in neg_pairs:
        if comp[m] == comp[h]:
            preds = {
                gp.literals[i].atom.name
                for i in range(n)
                if possible[i] and comp[i] == comp[m]
            }
            raise NonStratifiedError(preds)

    order = sorted(range(len(live_rules)), key=lambda i: comp[live_rules[i][0]] if live_rules[i][0] >= 0 else -1)
    model = bytearray(n)

    def add(lid: int) -> None:
        if model[lid]:
            return
        c = gp.complement[lid]
        if c >= 0 and model[c]:
            raise InconsistentError(gp.literals[lid], gp.literals[c])
        model[lid] = 1

    for lid in fact_ids:
        add(lid)

    # group rules by the SCC of their head and evaluate in dependency order
    by_comp: dict[int, list] = {}
    for head, pos, neg in live_rules:
        if head >= 0:
            by_comp.setdefault(comp[head], []).append((head, pos, neg))
    for comp_id in _topo_comp_order(comp, edges):
        rules_here = by_comp.get(comp_id)
        if not rules_here:
            continue
        changed = True
        while changed:
            changed = False
            for head, pos, neg in rules_here:
                if model[head]:
                    continue
                if all(model[b] for b in pos) and not any(model[m] for m in neg):
                    add(head)
                    changed = True

    for head, pos, neg in live_rules:
        if head < 0:
            if all(model[b] for b in pos) and not any(model[m] for m in neg):
                raise ConstraintError(
                    [gp.literals[b] for b in pos] + [Literal(gp.literals[m].atom, neg=gp.literals[m].neg, naf=True) for m in neg]
                )

    positive = frozenset(
        gp.literals[i].atom for i in range(n) if model[i] and not gp.literals[i].neg
    )
    negative = frozenset(
        gp.literals[i].atom for i in range(n) if model[i] and gp.literals[i].neg
    )
    return AnswerSet(positive=positive, negative=negative)


def _scc(nodes, edges) -> dict:
    """Iterative Tarjan; returns node -> component id."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comp: dict = {}
    counter = itertools.count()
    next_comp = itertools.count()

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(edges.get(root, ())))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for succ in it:
                if succ not in index:
                    index[succ] = low[succ] = next(counter)
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(edges.get(succ, ()))))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                cid = next(next_comp)
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp[member] = cid
                    if member == node:
                        break
    return comp


def _topo_comp_order(comp: dict, edges: dict) -> list:
    """Component ids ordered so body components precede head components."""
    comp_edges: dict = {}
    indeg: dict = {}
    for node, succs in edges.items():
        for succ in succs:
            a, b = comp[node], comp[succ]
            if a != b and b not in comp_edges.setdefault(a, set()):
                comp_edges[a].add(b)
    all_comps = sorted(set(comp.values()))
    for c in all_comps:
        indeg.setdefault(c, 0)
    for a, succs in comp_edges.items():
        for b in succs:
            indeg[b] += 1
    ready = sorted(c for c in all_comps if indeg[c] == 0)
    order = []
    while ready:
        c = ready.pop(0)
        order.append(c)
        for b in sorted(comp_edges.get(c, ())):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return order
