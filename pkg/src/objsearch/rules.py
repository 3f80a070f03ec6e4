"""Rule language: lexer, parser, AST and canonical serializer.

The language is a function-free-ish logic program dialect with sorts:
facts, rules with classical ('-') and default ('not') negation, inequality
guards, integer range sort declarations like step(1..10), and one level of
atom nesting so fluents such as holds(in(obj, room), 2) can be written.
Programs live in plain-text .kb files, '%' starts a comment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

MAX_IDENT = 64


# ---------------------------------------------------------------------------
# errors

class RuleError(Exception):
    """Base class for everything raised while reading a program."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, col {col})"
        super().__init__(message)


class LexError(RuleError):
    pass


class ParseError(RuleError):
    pass


class SafetyError(RuleError):
    """A head variable is not bound by any positive body literal."""


class ArityError(RuleError):
    """The same predicate is used with two different arities."""


class DisjunctionError(ParseError):
    """Epistemic disjunction ('or' between head literals) is not supported."""


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Number:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Arith:
    """A step offset term: variable plus or minus an integer literal."""

    var: str
    offset: int

    def __str__(self) -> str:
        sign = "+" if self.offset >= 0 else "-"
        return f"{self.var}{sign}{abs(self.offset)}"


@dataclass(frozen=True)
class Atom:
    """predicate(args...); args may contain one further level of Atom."""

    name: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


Term = Constant | Variable | Number | Arith | Atom


@dataclass(frozen=True)
class Literal:
    """An atom with optional classical ('-') and default ('not') negation."""

    atom: Atom
    neg: bool = False
    naf: bool = False

    def __str__(self) -> str:
        s = ("-" if self.neg else "") + str(self.atom)
        return f"not {s}" if self.naf else s

    def complement(self) -> "Literal":
        return Literal(self.atom, neg=not self.neg, naf=self.naf)


@dataclass(frozen=True)
class Guard:
    """An inequality test between two terms."""

    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True)
class Rule:
    """head :- body.  A bodyless rule is a fact, a headless one a constraint."""

    head: Literal | None
    body: tuple = ()

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        body = ", ".join(str(b) for b in self.body)
        if self.head is None:
            return f":- {body}."
        return f"{self.head} :- {body}."


@dataclass(frozen=True)
class Sort:
    """A named constant pool; either an explicit list or an integer range."""

    name: str
    constants: tuple = ()
    bounds: tuple | None = None  # (lo, hi) inclusive for range sorts

    def values(self) -> tuple:
        if self.bounds is not None:
            lo, hi = self.bounds
            return tuple(range(lo, hi + 1))
        return self.constants

    def __contains__(self, value) -> bool:
        if self.bounds is not None:
            return isinstance(value, int) and self.bounds[0] <= value <= self.bounds[1]
        return value in self.constants


@dataclass
class Program:
    """Sort declarations plus rules (facts are bodyless rules)."""

    sorts: dict = field(default_factory=dict)
    rules: tuple = ()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Program)
            and self.sorts == other.sorts
            and self.rules == other.rules
        )


# ---------------------------------------------------------------------------
# AST helpers

def atom_terms(atom: Atom):
    """Yield (path, term) pairs; path is a tuple of (functor, index) slots."""
    for i, arg in enumerate(atom.args):
        slot = (atom.name, i)
        if isinstance(arg, Atom):
            yield (slot,), arg
            for sub, term in atom_terms(arg):
                yield (slot,) + sub, term
        else:
            yield (slot,), arg


def term_variables(term: Term) -> set:
    if isinstance(term, Variable):
        return {term.name}
    if isinstance(term, Arith):
        return {term.var}
    if isinstance(term, Atom):
        names: set = set()
        for _, sub in atom_terms(term):
            if isinstance(sub, Variable):
                names.add(sub.name)
            elif isinstance(sub, Arith):
                names.add(sub.var)
        return names
    return set()


def atom_variables(atom: Atom) -> set:
    return term_variables(atom)


def is_ground(atom: Atom) -> bool:
    return not atom_variables(atom)


def atom_constants(atom: Atom) -> set:
    """All Constant names and Number values inside an atom."""
    out: set = set()
    for _, term in atom_terms(atom):
        if isinstance(term, Constant):
            out.add(term.name)
        elif isinstance(term, Number):
            out.add(term.value)
    return out


def substitute(atom: Atom, binding: dict) -> Atom:
    """Apply a variable binding; Arith terms are evaluated to Numbers."""
    args = []
    for arg in atom.args:
        if isinstance(arg, Variable):
            args.append(binding.get(arg.name, arg))
        elif isinstance(arg, Arith):
            val = binding.get(arg.var)
            if isinstance(val, Number):
                args.append(Number(val.value + arg.offset))
            elif val is None:
                args.append(arg)
            else:
                raise ValueError(f"arithmetic on non-integer binding for {arg.var}")
        elif isinstance(arg, Atom):
            args.append(substitute(arg, binding))
        else:
            args.append(arg)
    return Atom(atom.name, tuple(args))


def match(pattern: Atom, ground: Atom, binding: dict | None = None) -> dict | None:
    """Unify a pattern atom (may contain variables) with a ground atom."""
    if binding is None:
        binding = {}
    if pattern.name != ground.name or len(pattern.args) != len(ground.args):
        return None
    for p, g in zip(pattern.args, ground.args):
        if isinstance(p, Variable):
            bound = binding.get(p.name)
            if bound is None:
                binding[p.name] = g
            elif bound != g:
                return None
        elif isinstance(p, Atom):
            if not isinstance(g, Atom) or match(p, g, binding) is None:
                return None
        elif p != g:
            return None
    return binding


# ---------------------------------------------------------------------------
# lexer

class Tok(enum.Enum):
    IDENT = "ident"
    VARIABLE = "variable"
    NUMBER = "number"
    LPAREN = "("
    RPAREN = ")"
    COMMA = ","
    PERIOD = "."
    DOTDOT = ".."
    IF = ":-"
    NEQ = "!="
    MINUS = "-"
    PLUS = "+"
    NOT = "not"
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    type: Tok
    value: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token(Tok.NUMBER, text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if len(word) > MAX_IDENT:
                raise LexError(f"identifier longer than {MAX_IDENT} chars", line, start_col)
            if word == "not":
                tokens.append(Token(Tok.NOT, word, line, start_col))
            elif word[0].isupper():
                tokens.append(Token(Tok.VARIABLE, word, line, start_col))
            elif word[0] == "_":
                raise LexError("identifiers must start with a letter", line, start_col)
            else:
                tokens.append(Token(Tok.IDENT, word, line, start_col))
            col += j - i
            i = j
            continue
        if ch == ":" and text[i : i + 2] == ":-":
            tokens.append(Token(Tok.IF, ":-", line, start_col))
            i += 2
            col += 2
            continue
        if ch == "!" :
            if text[i : i + 2] != "!=":
                raise LexError("expected '=' after '!'", line, start_col)
            tokens.append(Token(Tok.NEQ, "!=", line, start_col))
            i += 2
            col += 2
            continue
        if ch == "." and text[i : i + 2] == "..":
            tokens.append(Token(Tok.DOTDOT, "..", line, start_col))
            i += 2
            col += 2
            continue
        simple = {
            "(": Tok.LPAREN,
            ")": Tok.RPAREN,
            ",": Tok.COMMA,
            ".": Tok.PERIOD,
            "-": Tok.MINUS,
            "+": Tok.PLUS,
        }
        if ch in simple:
            tokens.append(Token(simple[ch], ch, line, start_col))
            i += 1
            col += 1
            continue
        raise LexError(f"unexpected character {ch!r}", line, start_col)
    tokens.append(Token(Tok.EOF, "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser

@dataclass
class _RawStatement:
    """A parsed statement before sort/fact classification."""

    rule: Rule | None = None
    range_decl: tuple | None = None  # (name, lo, hi, line, col)


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type is not Tok.EOF:
            self.pos += 1
        return tok

    def expect(self, type_: Tok) -> Token:
        tok = self.peek()
        if tok.type is not type_:
            raise ParseError(f"expected {type_.value!r}, found {tok.value!r}", tok.line, tok.col)
        return self.advance()

    # statements ------------------------------------------------------------

    def parse(self) -> list:
        statements = []
        while self.peek().type is not Tok.EOF:
            statements.append(self.statement())
        return statements

    def statement(self) -> _RawStatement:
        tok = self.peek()
        if tok.type is Tok.IF:  # headless constraint
            self.advance()
            body = self.body()
            self.expect(Tok.PERIOD)
            return _RawStatement(rule=self._checked_rule(None, body, tok))
        decl = self._try_range_decl()
        if decl is not None:
            return decl
        if tok.type is Tok.NOT:
            raise ParseError("default negation is not allowed in rule heads", tok.line, tok.col)
        head = self.literal()
        nxt = self.peek()
        if nxt.type is Tok.IDENT and nxt.value == "or":
            raise DisjunctionError("epistemic disjunction is not supported", nxt.line, nxt.col)
        if nxt.type is Tok.PERIOD:
            self.advance()
            return _RawStatement(rule=self._checked_rule(head, (), tok))
        if nxt.type is Tok.IF:
            self.advance()
            body = self.body()
            self.expect(Tok.PERIOD)
            return _RawStatement(rule=self._checked_rule(head, body, tok))
        raise ParseError(f"expected '.' or ':-', found {nxt.value!r}", nxt.line, nxt.col)

    def _try_range_decl(self) -> _RawStatement | None:
        # ident ( NUMBER .. NUMBER ) .
        if (
            self.peek().type is Tok.IDENT
            and self.peek(1).type is Tok.LPAREN
            and self.peek(2).type is Tok.NUMBER
            and self.peek(3).type is Tok.DOTDOT
        ):
            name_tok = self.advance()
            self.advance()
            lo = int(self.advance().value)
            self.expect(Tok.DOTDOT)
            hi_tok = self.expect(Tok.NUMBER)
            hi = int(hi_tok.value)
            self.expect(Tok.RPAREN)
            self.expect(Tok.PERIOD)
            if hi < lo:
                raise ParseError("empty integer range", name_tok.line, name_tok.col)
            return _RawStatement(range_decl=(name_tok.value, lo, hi, name_tok.line, name_tok.col))
        return None

    def _checked_rule(self, head: Literal | None, body: tuple, at: Token) -> Rule:
        # safety: every head variable must occur in a positive body literal
        if head is not None:
            head_vars = atom_variables(head.atom)
            if head_vars:
                bound: set = set()
                for elem in body:
                    if isinstance(elem, Literal) and not elem.naf:
                        bound |= atom_variables(elem.atom)
                unbound = head_vars - bound
                if unbound:
                    name = sorted(unbound)[0]
                    raise SafetyError(f"head variable {name} is unbound", at.line, at.col)
        return Rule(head, body)

    # rule parts ------------------------------------------------------------

    def body(self) -> tuple:
        elems = [self.body_elem()]
        while self.peek().type is Tok.COMMA:
            self.advance()
            elems.append(self.body_elem())
        return tuple(elems)

    def body_elem(self):
        tok = self.peek()
        if tok.type is Tok.NOT:
            self.advance()
            lit = self.literal()
            return Literal(lit.atom, neg=lit.neg, naf=True)
        if tok.type is Tok.MINUS:
            return self.literal()
        term = self.term()
        if self.peek().type is Tok.NEQ:
            self.advance()
            right = self.term()
            return Guard(term, right)
        if isinstance(term, Atom):
            return Literal(term)
        raise ParseError(f"expected '!=' after term", self.peek().line, self.peek().col)

    def literal(self) -> Literal:
        neg = False
        if self.peek().type is Tok.MINUS:
            self.advance()
            neg = True
        tok = self.peek()
        term = self.term()
        if not isinstance(term, Atom):
            raise ParseError("expected an atom", tok.line, tok.col)
        return Literal(term, neg=neg)

    def term(self, depth: int = 0):
        tok = self.peek()
        if tok.type is Tok.NUMBER:
            self.advance()
            return Number(int(tok.value))
        if tok.type is Tok.VARIABLE:
            self.advance()
            if self.peek().type in (Tok.PLUS, Tok.MINUS):
                op = self.advance()
                num = self.expect(Tok.NUMBER)
                offset = int(num.value)
                if op.type is Tok.MINUS:
                    offset = -offset
                return Arith(tok.value, offset)
            return Variable(tok.value)
        if tok.type is Tok.IDENT:
            self.advance()
            if self.peek().type is not Tok.LPAREN:
                return Atom(tok.value) if depth == 0 else Constant(tok.value)
            if depth >= 2:
                raise ParseError("atoms may only nest one level deep", tok.line, tok.col)
            self.advance()
            args = [self.term(depth + 1)]
            while self.peek().type is Tok.COMMA:
                self.advance()
                args.append(self.term(depth + 1))
            self.expect(Tok.RPAREN)
            return Atom(tok.value, tuple(args))
        raise ParseError(f"expected a term, found {tok.value!r}", tok.line, tok.col)


# ---------------------------------------------------------------------------
# sort classification

def _predicate_uses(rule: Rule):
    """Yield (name, arity, role) for every atom occurrence in a rule.

    role is one of head, body, nested, fact (bodyless head).
    """
    items = []
    if rule.head is not None:
        items.append((rule.head, "fact" if not rule.body else "head"))
    for elem in rule.body:
        if isinstance(elem, Literal):
            items.append((elem, "body"))
        else:
            for side in (elem.left, elem.right):
                if isinstance(side, Atom):
                    yield side.name, len(side.args), "nested"
                    for _, t in atom_terms(side):
                        if isinstance(t, Atom):
                            yield t.name, len(t.args), "nested"
    for lit, role in items:
        yield lit.atom.name, len(lit.atom.args), role
        for _, term in atom_terms(lit.atom):
            if isinstance(term, Atom):
                yield term.name, len(term.args), "nested"


def _classify(statements: list) -> Program:
    """Split parsed statements into sort declarations and rules.

    A predicate is a sort iff every occurrence is a unary ground bodyless
    statement or a plain unary body literal; range declarations always are.
    """
    arity_seen: dict = {}
    disqualified: set = set()
    decl_candidates: dict = {}  # name -> list of constants in order
    ranges: dict = {}

    for st in statements:
        if st.range_decl is not None:
            name, lo, hi, line, col = st.range_decl
            if name in ranges and ranges[name] != (lo, hi):
                raise ParseError(f"conflicting ranges for sort {name}", line, col)
            ranges[name] = (lo, hi)
            continue
        rule = st.rule
        for name, arity, role in _predicate_uses(rule):
            if name in arity_seen and arity_seen[name] != arity:
                raise ArityError(f"predicate {name} used with arity {arity_seen[name]} and {arity}")
            arity_seen[name] = arity
            if role == "nested" or arity != 1:
                disqualified.add(name)
        head = rule.head
        if (
            head is not None
            and not rule.body
            and not head.neg
            and len(head.atom.args) == 1
            and isinstance(head.atom.args[0], Constant)
        ):
            decl_candidates.setdefault(head.atom.name, [])
            if head.atom.args[0].name not in decl_candidates[head.atom.name]:
                decl_candidates[head.atom.name].append(head.atom.args[0].name)
            continue
        if head is not None:
            disqualified.add(head.atom.name)
        for elem in rule.body:
            if isinstance(elem, Literal) and (elem.neg or elem.naf):
                disqualified.add(elem.atom.name)

    for name in ranges:
        if name in arity_seen and arity_seen[name] != 1:
            raise ArityError(f"predicate {name} used both as range sort and with arity {arity_seen[name]}")

    sorts: dict = {}
    for name, (lo, hi) in ranges.items():
        sorts[name] = Sort(name, bounds=(lo, hi))
    for name, constants in decl_candidates.items():
        if name in disqualified:
            continue
        if name in sorts:
            raise ParseError(f"sort {name} declared both as range and constants")
        sorts[name] = Sort(name, constants=tuple(constants))

    rules = []
    for st in statements:
        if st.rule is None:
            continue
        head = st.rule.head
        if (
            head is not None
            and not st.rule.body
            and not head.neg
            and head.atom.name in sorts
        ):
            continue  # absorbed into the sort declaration
        rules.append(st.rule)
    return Program(sorts=sorts, rules=tuple(rules))


# ---------------------------------------------------------------------------
# public API

def parse_program(text: str) -> Program:
    """Parse program text into a Program; raises RuleError subclasses."""
    statements = _Parser(tokenize(text)).parse()
    return _classify(statements)


def load_program(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def serialize_program(program: Program) -> str:
    """Canonical text: sort declarations (sorted by name) then rules in order."""
    lines = []
    for name in sorted(program.sorts):
        sort = program.sorts[name]
        if sort.bounds is not None:
            lines.append(f"{name}({sort.bounds[0]}..{sort.bounds[1]}).")
        else:
            for const in sort.constants:
                lines.append(f"{name}({const}).")
    for rule in program.rules:
        lines.append(str(rule))
    return "\n".join(lines) + "\n"
