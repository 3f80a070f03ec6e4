"""Knowledge base with provenance-ranked facts and a class hierarchy.

Facts carry a provenance tag; contradictions discovered either directly
by the location-exclusivity template or via an inconsistent model are
repaired by retracting the lower-ranked side. Ties fall to the
tie_break policy. The ground program is built once and reused, so a
fact assertion costs one incremental solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rules import Atom, Literal, Number, Program, is_ground
from .solver import (
    ConstraintError,
    GroundingError,
    InconsistentError,
    ground,
    solve,
)

PRECEDENCE = {
    "initial": 0,
    "sensor-low": 1,
    "sensor-high": 2,
    "human": 3,
}


class KnowledgeError(Exception):
    pass


class RepairTie(KnowledgeError):
    """Equal-precedence contradiction under tie_break='error'."""


@dataclass
class FactRecord:
    literal: Literal
    provenance: str
    timestep: int | None
    confidence: float | None
    seq: int

    @property
    def rank(self):
        # provenance first, then recency by timestep
        step = self.timestep if self.timestep is not None else -1
        return (PRECEDENCE[self.provenance], step)


def location_key(literal: Literal):
    """(object, step) and room for positive holds(in(O, R), T) literals."""
    if literal.neg:
        return None
    a = literal.atom
    if a.name != "holds" or len(a.args) != 2:
        return None
    inner = a.args[0]
    if not isinstance(inner, Atom) or inner.name != "in" or len(inner.args) != 2:
        return None
    return (inner.args[0], a.args[1]), inner.args[1]


class KnowledgeBase:
    """Fact store over a fixed rule program.

    tie_break governs contradictions that provenance rank and timestep
    recency cannot order: "error" surfaces a RepairTie (default, so the
    caller can resolve it, e.g. by asking), "newest"/"oldest" keep one
    side by insertion order. A pre-built ground program can be shared
    across many knowledge bases over the same rules.
    """

    def __init__(self, program: Program, signature: dict | None = None,
                 tie_break: str = "error", ground_program=None):
        if tie_break not in ("newest", "oldest", "error"):
            raise KnowledgeError(f"unknown tie_break {tie_break}")
        self.program = program
        self.signature = signature
        self.tie_break = tie_break
        self._ground = ground_program if ground_program is not None else ground(program, signature)
        self._records: dict[Literal, FactRecord] = {}
        self._seq = 0
        self.version = 0
        self.repair_log: list = []
        self._cache = None

    # -- fact store ---------------------------------------------------

    @property
    def facts(self) -> tuple:
        return tuple(self._records.values())

    def fact_count(self) -> int:
        return len(self._records)

    def has_fact(self, literal: Literal) -> bool:
        return literal in self._records

    def _validate(self, literal: Literal) -> None:
        if not isinstance(literal, Literal) or literal.naf:
            raise KnowledgeError(f"facts must be plain literals, got {literal}")
        if not is_ground(literal.atom):
            raise KnowledgeError(f"facts must be ground: {literal}")
        sorts = self.program.sorts.values()
        for term in _walk(literal.atom):
            if isinstance(term, Number):
                if not any(s.bounds is not None and term.value in s for s in sorts):
                    raise KnowledgeError(f"step {term.value} outside every range sort")
            elif not isinstance(term, Atom):
                if not any(term.name in s for s in sorts):
                    raise KnowledgeError(f"constant {term.name} is not in any sort")

    def _conflicts(self, literal: Literal) -> list:
        found = []
        comp = self._records.get(literal.complement())
        if comp is not None:
            found.append(comp)
        key = location_key(literal)
        if key is not None:
            for rec in self._records.values():
                other = location_key(rec.literal)
                if other is not None and other[0] == key[0] and other[1] != key[1]:
                    found.append(rec)
        return found

    def assert_fact(self, literal: Literal, provenance: str,
                    timestep: int | None = None,
                    confidence: float | None = None) -> bool:
        """Add a fact, resolving contradictions by provenance rank.

        Returns True when the knowledge base changed.
        """
        inserted = self._insert(literal, provenance, timestep, confidence)
        if inserted == 2:
            self._repair_until_consistent()
        return inserted > 0

    def assert_many(self, items) -> int:
        """Batch assert with a single consistency pass at the end.

        items are (literal, provenance) or (literal, provenance,
        timestep) or (literal, provenance, timestep, confidence)
        tuples. Returns the number of changes applied. Much cheaper
        than repeated assert_fact when seeding dozens of facts.
        """
        changed = 0
        solved = False
        for item in items:
            state = self._insert(*item)
            if state > 0:
                changed += 1
            if state == 2:
                solved = True
        if solved:
            self._repair_until_consistent()
        return changed

    def _insert(self, literal: Literal, provenance: str,
                timestep: int | None = None,
                confidence: float | None = None) -> int:
        """Record one fact. 0 no change, 1 provenance upgrade, 2 new record."""
        if provenance not in PRECEDENCE:
            raise KnowledgeError(f"unknown provenance {provenance}")
        self._validate(literal)
        if timestep is None:
            step = literal.atom.args[-1] if literal.atom.args else None
            timestep = step.value if isinstance(step, Number) else None

        existing = self._records.get(literal)
        if existing is not None:
            if PRECEDENCE[provenance] > PRECEDENCE[existing.provenance]:
                existing.provenance = provenance
                existing.confidence = confidence
                self.version += 1
                return 1
            return 0

        rank = (PRECEDENCE[provenance], timestep if timestep is not None else -1)
        losers = []
        for rec in self._conflicts(literal):
            if rank > rec.rank:
                losers.append(rec)
            elif rank < rec.rank:
                self.repair_log.append(("rejected", literal, provenance, rec.literal))
                return 0
            elif self.tie_break == "error":
                raise RepairTie(f"{literal} vs {rec.literal} at equal rank")
            elif self.tie_break == "newest":
                losers.append(rec)
            else:
                self.repair_log.append(("rejected", literal, provenance, rec.literal))
                return 0
        for rec in losers:
            del self._records[rec.literal]
            self.repair_log.append(("superseded", rec.literal, rec.provenance, literal))

        self._seq += 1
        self._records[literal] = FactRecord(literal, provenance, timestep, confidence, self._seq)
        self.version += 1
        return 2

    def retract(self, literal: Literal) -> bool:
        rec = self._records.pop(literal, None)
        if rec is None:
            return False
        self.version += 1
        return True

    def _repair_until_consistent(self) -> None:
        for _ in range(len(self._records) + 1):
            try:
                self.answer_set()
                return
            except InconsistentError as err:
                lit, comp = err.pair
                candidates = [
                    rec for rec in self._records.values()
                    if rec.literal in (lit, comp)
                    or _same_family(rec.literal, lit)
                    or _same_family(rec.literal, comp)
                ]
                if len(candidates) < 2:
                    raise
                best = max(r.rank for r in candidates)
                tied = [r for r in candidates if r.rank == best]
                if len(tied) > 1 and self.tie_break == "error":
                    raise RepairTie(
                        f"{tied[0].literal} vs {tied[1].literal} at equal rank"
                    )
                pick = max if self.tie_break != "oldest" else min
                keep = pick(tied, key=lambda r: r.seq)
                dropped = False
                for rec in candidates:
                    if rec is keep:
                        continue
                    del self._records[rec.literal]
                    self.repair_log.append(("repair", rec.literal, rec.provenance, keep.literal))
                    dropped = True
                if not dropped:
                    raise
                self.version += 1
        raise KnowledgeError("repair loop did not converge")

    # -- reasoning ----------------------------------------------------

    def answer_set(self):
        if self._cache is not None and self._cache[0] == self.version:
            return self._cache[1]
        ans = solve(self._ground, [rec.literal for rec in self._records.values()])
        self._cache = (self.version, ans)
        return ans

    def query(self, pattern) -> set:
        return self.answer_set().matches(pattern)

    def revise(self, program: Program) -> None:
        """Swap in a new rule program, keeping stored facts where valid."""
        self.program = program
        self._ground = ground(program, self.signature)
        self._cache = None
        kept = {}
        for lit, rec in self._records.items():
            try:
                self._validate(lit)
            except KnowledgeError:
                self.repair_log.append(("dropped", lit, rec.provenance, None))
                continue
            kept[lit] = rec
        self._records = kept
        self.version += 1
        self._repair_until_consistent()

    def dump_answer_set(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.answer_set().to_text())


def _walk(atom: Atom):
    for arg in atom.args:
        if isinstance(arg, Atom):
            yield arg
            yield from _walk(arg)
        else:
            yield arg


def _same_family(a: Literal, b: Literal) -> bool:
    """Location facts about the same object, at any step.

    Inertia projects old readings forward, so a conflict surfacing at
    one step may be rooted in a record from an earlier one.
    """
    ka = location_key(a) or location_key(a.complement())
    kb = location_key(b) or location_key(b.complement())
    return ka is not None and kb is not None and ka[0][0] == kb[0][0]


# ---------------------------------------------------------------------------
# class hierarchy

class HierarchyError(Exception):
    pass


class ObjectHierarchy:
    """Tree of classes plus object instances at the leaves."""

    def __init__(self, parent: dict, instances: dict | None = None):
        self.parent = dict(parent)
        self.instances: dict = {c: list(objs) for c, objs in (instances or {}).items()}
        roots = {c for c in self._classes() if c not in self.parent}
        if len(roots) != 1:
            raise HierarchyError(f"expected one root, found {sorted(roots)}")
        self.root = roots.pop()

    def _classes(self) -> set:
        out = set(self.parent) | set(self.parent.values())
        out |= set(self.instances)
        return out

    @property
    def classes(self) -> tuple:
        return tuple(sorted(self._classes()))

    def children(self, cls: str) -> tuple:
        return tuple(sorted(c for c, p in self.parent.items() if p == cls))

    def primaries(self) -> tuple:
        return tuple(sorted(c for c in self._classes() if not self.children(c)))

    def class_of(self, obj: str) -> str:
        for cls, objs in self.instances.items():
            if obj in objs:
                return cls
        raise HierarchyError(f"unknown object {obj}")

    def instance_count(self, cls: str) -> int:
        return len(self.instances.get(cls, ()))

    def ancestors(self, cls: str) -> tuple:
        out = [cls]
        while out[-1] in self.parent:
            out.append(self.parent[out[-1]])
        return tuple(out)

    @classmethod
    def from_program(cls, program: Program) -> "ObjectHierarchy":
        parent: dict = {}
        instances: dict = {}
        for rule in program.rules:
            if rule.body or rule.head is None or rule.head.neg:
                continue
            a = rule.head.atom
            if a.name == "subclass" and len(a.args) == 2:
                parent[a.args[0].name] = a.args[1].name
            elif a.name == "is" and len(a.args) == 2:
                instances.setdefault(a.args[1].name, []).append(a.args[0].name)
        return cls(parent, instances)

    def to_facts(self) -> str:
        lines = [
            f"subclass({c}, {p})." for c, p in sorted(self.parent.items())
        ]
        for c in sorted(self.instances):
            for o in sorted(self.instances[c]):
                lines.append(f"is({o}, {c}).")
        return "\n".join(lines) + ("\n" if lines else "")

    def lca_path(self, target_cls: str, evidence_cls: str):
        """Climb from the evidence class to its common ancestor with the target.

        Returns (height, widths): height counts chain nodes strictly
        below the common ancestor on the evidence side, widths the
        sibling counts along that chain with the first level pinned to
        one. Evidence sitting right under the shared ancestor thus
        carries full weight; deeper forks attenuate it.
        """
        if target_cls not in self._classes():
            raise HierarchyError(f"unknown class {target_cls}")
        if evidence_cls not in self._classes():
            raise HierarchyError(f"unknown class {evidence_cls}")
        target_anc = set(self.ancestors(target_cls))
        chain = []
        cur = evidence_cls
        while cur not in target_anc:
            chain.append(cur)
            if cur not in self.parent:
                raise HierarchyError(
                    f"{target_cls} and {evidence_cls} share no ancestor"
                )
            cur = self.parent[cur]
        if not chain:
            return 1, (1,)
        widths = [1] + [
            len(self.children(self.parent[c])) for c in chain[1:]
        ]
        return len(chain), tuple(widths)

    # -- revision ------------------------------------------------------

    def add_instance(self, obj: str, cls: str) -> None:
        if cls not in self._classes():
            raise HierarchyError(f"unknown class {cls}")
        for objs in self.instances.values():
            if obj in objs:
                raise HierarchyError(f"{obj} already placed")
        self.instances.setdefault(cls, []).append(obj)

    def remove_instance(self, obj: str) -> None:
        cls = self.class_of(obj)
        self.instances[cls].remove(obj)

    def merge_classes(self, into: str, absorbed: str) -> None:
        """Fold one class into a sibling, moving its instances."""
        if self.parent.get(into) != self.parent.get(absorbed):
            raise HierarchyError(f"{into} and {absorbed} are not siblings")
        if self.children(absorbed):
            raise HierarchyError(f"{absorbed} still has subclasses")
        for obj in self.instances.pop(absorbed, []):
            self.instances.setdefault(into, []).append(obj)
        del self.parent[absorbed]
