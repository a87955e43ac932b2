"""A small dependent type language interpreted in the cardinal algebra.

Grammar (``Σ``/``Π``/``λ`` are accepted as aliases of ``Sigma``/``Pi``/``fun``)::

    type ::= Unit | Fin atom | Sigma (x : type) . type | Pi (x : type) . type
           | Id atype atom atom | Id(type, term, term) | ( type )
    term ::= fun x . term | atom atom*
    atom ::= numeral | name | ( term , term ) | ( term )

A numeral ``k`` checked against a type denotes the ``k``-th point of its
fiber; ``Fin t`` with ``t`` a non-numeral term is the cardinal given by the
position of ``t`` in its own type (so ``Fin x`` for ``x : Fin 3`` ranges over
0, 1, 2).

Elaboration maps a type in context ``Γ`` to a table from the semantic extent
of ``Γ`` (environments, one ``U̇`` point per variable) to ``U``; substitution
is then precomposition with the table of the substitution.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .finset import FinMap, FinSet, Label
from .mlalg import MLAlgebra, OutOfBoundError, TypeMismatchError, nat_algebra
from .polynomial import PolyElement


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScopeError(ValueError):
    pass


# -- syntax ------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Pair:
    fst: "Term"
    snd: "Term"


@dataclass(frozen=True)
class Lam:
    name: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


Term = Union[Num, Var, Pair, Lam, App]


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Fin:
    size: Term


@dataclass(frozen=True)
class Sigma:
    name: str
    dom: "TypeExpr"
    body: "TypeExpr"


@dataclass(frozen=True)
class Pi:
    name: str
    dom: "TypeExpr"
    body: "TypeExpr"


@dataclass(frozen=True)
class Id:
    type: "TypeExpr"
    lhs: Term
    rhs: Term


TypeExpr = Union[Unit, Fin, Sigma, Pi, Id]

KEYWORDS = {"Unit", "Fin", "Sigma", "Pi", "Id", "fun"}
ALIASES = {"Σ": "Sigma", "Π": "Pi", "λ": "fun"}
TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9']*)|(?P<sym>[():.,ΣΠλ]))")


@dataclass(frozen=True)
class Token:
    kind: str  # num | name | sym | kw | end
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(offset: int) -> tuple[int, int]:
        line = max(i for i, s in enumerate(line_starts) if s <= offset)
        return line + 1, offset - line_starts[line] + 1

    while True:
        m = TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            offset = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {text[offset]!r}", *where(offset))
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "sym" and value in ALIASES:
            kind, value = "kw", ALIASES[value]
        elif kind == "name" and value in KEYWORDS:
            kind = "kw"
        tokens.append(Token(kind, value, *where(start)))
        pos = m.end()
    tokens.append(Token("end", "", *where(len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def fail(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.line, t.column)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("sym", "kw") and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.fail(f"expected {text!r}")

    def name(self) -> str:
        if self.tok.kind != "name":
            self.fail("expected a variable name")
        value = self.tok.text
        self.pos += 1
        return value

    def finish(self) -> None:
        if self.tok.kind != "end":
            self.fail("expected end of input")

    # types

    def type(self) -> TypeExpr:
        t = self.tok
        if self.accept("Sigma") or self.accept("Pi"):
            ctor = Sigma if t.text == "Sigma" else Pi
            self.expect("(")
            x = self.name()
            self.expect(":")
            dom = self.type()
            self.expect(")")
            self.expect(".")
            return ctor(x, dom, self.type())
        if self.accept("Id"):
            if self.tok.text == "(" and self._comma_form():
                self.expect("(")
                A = self.type()
                self.expect(",")
                a = self.term()
                self.expect(",")
                b = self.term()
                self.expect(")")
                return Id(A, a, b)
            A = self.atype()
            return Id(A, self.atom(), self.atom())
        return self.atype()

    def _comma_form(self) -> bool:
        """Whether the parenthesis after ``Id`` opens ``(A, a, b)`` rather than a grouped type."""
        depth = 0
        for tok in self.tokens[self.pos :]:
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
                if depth == 0:
                    return False
            elif tok.text == "," and depth == 1:
                return True
            if tok.kind == "end":
                return False
        return False

    def atype(self) -> TypeExpr:
        if self.accept("Unit"):
            return Unit()
        if self.accept("Fin"):
            return Fin(self.atom())
        if self.accept("("):
            inner = self.type()
            self.expect(")")
            return inner
        self.fail("expected a type")

    # terms

    def term(self) -> Term:
        if self.accept("fun"):
            x = self.name()
            self.expect(".")
            return Lam(x, self.term())
        t = self.atom()
        while self.tok.kind in ("num", "name") or self.tok.text == "(":
            t = App(t, self.atom())
        return t

    def atom(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Num(int(t.text))
        if t.kind == "name":
            self.pos += 1
            return Var(t.text)
        if self.accept("("):
            first = self.term()
            if self.accept(","):
                second = self.term()
                self.expect(")")
                return Pair(first, second)
            self.expect(")")
            return first
        self.fail("expected a term")


def parse(text: str) -> TypeExpr:
    p = _Parser(text)
    e = p.type()
    p.finish()
    return e


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.finish()
    return t


def pretty(e) -> str:
    """Print a type or term so that :func:`parse` reads it back to the same tree."""
    if isinstance(e, Unit):
        return "Unit"
    if isinstance(e, Fin):
        return f"Fin {_pretty_atom(e.size)}"
    if isinstance(e, (Sigma, Pi)):
        head = "Sigma" if isinstance(e, Sigma) else "Pi"
        return f"{head} ({e.name} : {pretty(e.dom)}) . {pretty(e.body)}"
    if isinstance(e, Id):
        return f"Id({pretty(e.type)}, {pretty(e.lhs)}, {pretty(e.rhs)})"
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Pair):
        return f"({pretty(e.fst)}, {pretty(e.snd)})"
    if isinstance(e, Lam):
        return f"fun {e.name} . {pretty(e.body)}"
    if isinstance(e, App):
        fn = pretty(e.fn) if isinstance(e.fn, (Num, Var, Pair, App)) else f"({pretty(e.fn)})"
        return f"{fn} {_pretty_atom(e.arg)}"
    raise TypeError(f"not a syntax tree: {e!r}")


def _pretty_atom(t: Term) -> str:
    if isinstance(t, (Num, Var, Pair)):
        return pretty(t)
    return f"({pretty(t)})"


# -- scope and substitution --------------------------------------------------------


def free_vars(e) -> frozenset:
    if isinstance(e, (Unit, Num)):
        return frozenset()
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Fin):
        return free_vars(e.size)
    if isinstance(e, (Sigma, Pi)):
        return free_vars(e.dom) | (free_vars(e.body) - {e.name})
    if isinstance(e, Id):
        return free_vars(e.type) | free_vars(e.lhs) | free_vars(e.rhs)
    if isinstance(e, Pair):
        return free_vars(e.fst) | free_vars(e.snd)
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.name}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    raise TypeError(f"not a syntax tree: {e!r}")


def _fresh(name: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    candidate = name
    while candidate in avoid:
        candidate += "'"
    return candidate


def substitute(e, sigma: Mapping[str, Term]):
    """Capture-avoiding simultaneous substitution."""
    if isinstance(e, (Unit, Num)):
        return e
    if isinstance(e, Var):
        return sigma.get(e.name, e)
    if isinstance(e, Fin):
        return Fin(substitute(e.size, sigma))
    if isinstance(e, Id):
        return Id(substitute(e.type, sigma), substitute(e.lhs, sigma), substitute(e.rhs, sigma))
    if isinstance(e, Pair):
        return Pair(substitute(e.fst, sigma), substitute(e.snd, sigma))
    if isinstance(e, App):
        return App(substitute(e.fn, sigma), substitute(e.arg, sigma))
    if isinstance(e, (Sigma, Pi, Lam)):
        inner = {k: v for k, v in sigma.items() if k != e.name}
        incoming = set().union(*(free_vars(v) for k, v in inner.items() if k in free_vars(e.body))) if inner else set()
        name = e.name
        body = e.body
        if name in incoming:
            name = _fresh(name, incoming | free_vars(body) | set(inner))
            body = substitute(body, {e.name: Var(name)})
        body = substitute(body, inner)
        if isinstance(e, Lam):
            return Lam(name, body)
        return type(e)(name, substitute(e.dom, sigma), body)
    raise TypeError(f"not a syntax tree: {e!r}")


def depth(e) -> int:
    if isinstance(e, (Unit, Fin)):
        return 1
    if isinstance(e, (Sigma, Pi)):
        return 1 + max(depth(e.dom), depth(e.body))
    if isinstance(e, Id):
        return 1 + depth(e.type)
    raise TypeError(f"not a type: {e!r}")


# -- semantics ----------------------------------------------------------------------


@dataclass(frozen=True)
class Binding:
    """A variable's value together with its type and the scope that type lives in."""

    name: str
    value: Label
    type: TypeExpr
    scope: tuple  # of Binding


def _lookup(scope: tuple, name: str) -> Binding:
    for b in reversed(scope):
        if b.name == name:
            return b
    raise ScopeError(f"unbound variable {name!r}")


class Interpreter:
    """Evaluates syntax in an :class:`MLAlgebra` whose ``U̇`` points are ``(n, i)`` pairs."""

    def __init__(self, alg: MLAlgebra):
        self.alg = alg
        # type values keyed by (tree identity, environment values); trees outlive one elaboration
        self._memo: dict = {}

    def cardinal_of(self, t: Term, scope: tuple) -> Label:
        if isinstance(t, Num):
            if t.value not in self.alg.U:
                raise OutOfBoundError("Fin", t.value, t.value, self.alg.bound)
            return t.value
        value, T, tscope = self.infer(t, scope)
        return self.alg.fiber(self.type_value(T, tscope)).index(value)

    def type_value(self, T: TypeExpr, scope: tuple) -> Label:
        key = (id(T), tuple((b.name, b.value) for b in scope))
        hit = self._memo.get(key)
        if hit is None:
            hit = self._memo[key] = (T, self._type_value(T, scope))
        return hit[1]

    def _type_value(self, T: TypeExpr, scope: tuple) -> Label:
        alg = self.alg
        if isinstance(T, Unit):
            return alg.one
        if isinstance(T, Fin):
            return self.cardinal_of(T.size, scope)
        if isinstance(T, (Sigma, Pi)):
            a = self.type_value(T.dom, scope)
            family = PolyElement(
                a,
                tuple(self.type_value(T.body, scope + (Binding(T.name, v, T.dom, scope),)) for v in alg.fiber(a)),
            )
            return alg.Sigma(family) if isinstance(T, Sigma) else alg.Pi(family)
        if isinstance(T, Id):
            if alg.eq is None:
                raise TypeMismatchError(f"{alg.name} has no Eq structure")
            a = self.check(T.lhs, T.type, scope, scope)
            b = self.check(T.rhs, T.type, scope, scope)
            return alg.eq.Eq(a, b)
        raise TypeError(f"not a type: {T!r}")

    def infer(self, t: Term, scope: tuple) -> tuple:
        """Value of ``t`` with its type and that type's scope."""
        if isinstance(t, Var):
            b = _lookup(scope, t.name)
            return b.value, b.type, b.scope
        if isinstance(t, App):
            f, T, tscope = self.infer(t.fn, scope)
            if not isinstance(T, Pi):
                raise TypeMismatchError(f"applying {pretty(t.fn)}, which is not a function")
            a = self.type_value(T.dom, tscope)
            codes = [self.type_value(T.body, tscope + (Binding(T.name, v, T.dom, tscope),)) for v in self.alg.fiber(a)]
            entries = self._unlam(PolyElement(a, tuple(codes)), f)
            x = self.check(t.arg, T.dom, tscope, scope)
            result = entries[self.alg.fiber(a).index(x)]
            return result, T.body, tscope + (Binding(T.name, x, T.dom, tscope),)
        raise TypeMismatchError(f"cannot infer the type of {pretty(t)}; annotate it by its position")

    def _unlam(self, family: PolyElement, term: Label) -> tuple:
        for es in itertools.product(*(self.alg.fiber(v) for v in family.section)):
            if self.alg.lam(PolyElement(family.base, es)) == term:
                return es
        raise TypeMismatchError(f"{term!r} is not a function of type Π {family!r}")

    def check(self, t: Term, T: TypeExpr, tscope: tuple, scope: tuple) -> Label:
        """Value of ``t`` as an element of ``T`` (``T`` read in ``tscope``, ``t`` in ``scope``)."""
        alg = self.alg
        if isinstance(t, Num):
            pts = alg.fiber(self.type_value(T, tscope))
            if t.value >= len(pts):
                raise TypeMismatchError(f"numeral {t.value} is not an element of {pretty(T)} ({len(pts)} elements)")
            return pts[t.value]
        if isinstance(t, Pair):
            if not isinstance(T, Sigma):
                raise TypeMismatchError(f"a pair cannot have type {pretty(T)}")
            a = self.type_value(T.dom, tscope)
            x = self.check(t.fst, T.dom, tscope, scope)
            family = PolyElement(
                a,
                tuple(self.type_value(T.body, tscope + (Binding(T.name, v, T.dom, tscope),)) for v in alg.fiber(a)),
            )
            y = self.check(t.snd, T.body, tscope + (Binding(T.name, x, T.dom, tscope),), scope)
            return alg.sigma(family, x, y)
        if isinstance(t, Lam):
            if not isinstance(T, Pi):
                raise TypeMismatchError(f"a function cannot have type {pretty(T)}")
            a = self.type_value(T.dom, tscope)
            body = []
            for v in alg.fiber(a):
                inner_t = tscope + (Binding(T.name, v, T.dom, tscope),)
                inner = scope + (Binding(t.name, v, T.dom, tscope),)
                body.append(self.check(t.body, T.body, inner_t, inner))
            return alg.lam(PolyElement(a, tuple(body)))
        value, U, uscope = self.infer(t, scope)
        expected, got = self.type_value(T, tscope), self.type_value(U, uscope)
        if expected != got:
            raise TypeMismatchError(f"{pretty(t)} has type {pretty(U)} (= {got}), expected {pretty(T)} (= {expected})")
        return value


@dataclass(frozen=True)
class Context:
    entries: tuple = ()  # (name, TypeExpr)

    @classmethod
    def parse(cls, text: str) -> "Context":
        """``"x : Fin 3, y : Fin x"``; commas inside parentheses do not split."""
        entries = []
        depth_ = 0
        start = 0
        parts = []
        for k, ch in enumerate(text):
            if ch == "(":
                depth_ += 1
            elif ch == ")":
                depth_ -= 1
            elif ch == "," and depth_ == 0:
                parts.append(text[start:k])
                start = k + 1
        parts.append(text[start:])
        for part in parts:
            if not part.strip():
                continue
            name, sep, ty = part.partition(":")
            if not sep or not name.strip():
                raise ParseError(f"context entry {part.strip()!r} is not 'name : type'", 1, 1)
            entries.append((name.strip(), parse(ty)))
        return cls(tuple(entries))

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.entries)

    def check_scope(self) -> None:
        seen: set = set()
        for name, T in self.entries:
            missing = free_vars(T) - seen
            if missing:
                raise ScopeError(f"unbound variable {sorted(missing)[0]!r} in the type of {name!r}")
            seen.add(name)

    def scopes(self, alg: MLAlgebra) -> list[tuple]:
        """Every environment of the context as a chain of bindings (iterated context extension)."""
        self.check_scope()
        interp = Interpreter(alg)
        scopes: list[tuple] = [()]
        for name, T in self.entries:
            scopes = [
                scope + (Binding(name, v, T, scope),)
                for scope in scopes
                for v in alg.fiber(interp.type_value(T, scope))
            ]
        return scopes

    def extent(self, alg: MLAlgebra) -> FinSet:
        return FinSet(tuple(tuple(b.value for b in s) for s in self.scopes(alg)))


def elaborate(ctx: Context, e: TypeExpr, alg: MLAlgebra | None = None) -> FinMap:
    """The classifying map ``⟦Γ⟧ -> U`` of a type in context."""
    alg = alg if alg is not None else nat_algebra(DEFAULT_BOUND)
    missing = free_vars(e) - set(ctx.names)
    if missing:
        raise ScopeError(f"unbound variable {sorted(missing)[0]!r}")
    interp = Interpreter(alg)
    scopes = ctx.scopes(alg)
    table = tuple(interp.type_value(e, s) for s in scopes)
    return FinMap(FinSet(tuple(tuple(b.value for b in s) for s in scopes)), alg.U, table)


def elaborate_term(ctx: Context, t: Term, T: TypeExpr, alg: MLAlgebra | None = None) -> FinMap:
    """A term's section ``⟦Γ⟧ -> U̇`` lying over the elaboration of its type."""
    alg = alg if alg is not None else nat_algebra(DEFAULT_BOUND)
    interp = Interpreter(alg)
    scopes = ctx.scopes(alg)
    table = tuple(interp.check(t, T, s, s) for s in scopes)
    cod = FinSet(tuple(dict.fromkeys(table)))
    return FinMap(FinSet(tuple(tuple(b.value for b in s) for s in scopes)), cod, table)


def substitution_map(delta: Context, gamma: Context, sigma: Mapping[str, Term], alg: MLAlgebra | None = None) -> FinMap:
    """``⟦σ⟧ : ⟦Δ⟧ -> ⟦Γ⟧``; each ``σ(x)`` is checked against its type with earlier entries substituted."""
    alg = alg if alg is not None else nat_algebra(DEFAULT_BOUND)
    interp = Interpreter(alg)
    for name in gamma.names:
        if name not in sigma:
            raise ScopeError(f"substitution does not cover {name!r}")
    table = []
    for scope in delta.scopes(alg):
        target: tuple = ()
        for name, T in gamma.entries:
            v = interp.check(sigma[name], T, target, scope)
            target = target + (Binding(name, v, T, target),)
        table.append(tuple(b.value for b in target))
    src = FinSet(tuple(tuple(b.value for b in s) for s in delta.scopes(alg)))
    return FinMap(src, gamma.extent(alg), tuple(table))


@dataclass(frozen=True)
class CoherenceResult:
    substituted: TypeExpr
    direct: FinMap  # elaborate(Δ, e[σ])
    composed: tuple  # table of elaborate(Γ, e) ∘ ⟦σ⟧

    @property
    def ok(self) -> bool:
        return self.direct.table == self.composed


def substitution_coherence(
    delta: Context, gamma: Context, e: TypeExpr, sigma: Mapping[str, Term], alg: MLAlgebra | None = None
) -> CoherenceResult:
    alg = alg if alg is not None else nat_algebra(DEFAULT_BOUND)
    outer = elaborate(gamma, e, alg)
    sub = substitute(e, sigma)
    direct = elaborate(delta, sub, alg)
    smap = substitution_map(delta, gamma, sigma, alg)
    return CoherenceResult(sub, direct, tuple(outer(smap(d)) for d in direct.dom.elements))


DEFAULT_BOUND = 4096


def cardinality(e: TypeExpr, alg: MLAlgebra | None = None) -> int:
    missing = free_vars(e)
    if missing:
        raise ScopeError(f"expression is not closed: {sorted(missing)[0]!r} is free")
    return elaborate(Context(), e, alg).table[0]


def expressions(
    names: tuple, max_depth: int, max_fin: int = 3, binders: tuple = ("a",), numerals: tuple = (0, 1)
) -> Iterator[TypeExpr]:
    """Every type of depth ``<= max_depth`` over the given variables.

    Leaves are ``Unit``, ``Fin k`` (``k <= max_fin``) and ``Fin v``; ``Id``
    compares numerals and variables at a leaf type.
    """
    if max_depth < 1:
        return
    yield Unit()
    for k in range(max_fin + 1):
        yield Fin(Num(k))
    for v in names:
        yield Fin(Var(v))
    if max_depth < 2:
        return
    inner = list(expressions(names, max_depth - 1, max_fin, binders, numerals))
    leaves = [T for T in inner if isinstance(T, (Unit, Fin))]
    terms = [Num(k) for k in numerals] + [Var(v) for v in names]
    for A in leaves:
        for a in terms:
            for b in terms:
                yield Id(A, a, b)
    for x in binders:
        body_names = tuple(dict.fromkeys(names + (x,)))
        bodies = list(expressions(body_names, max_depth - 1, max_fin, binders, numerals))
        for A in inner:
            for B in bodies:
                yield Sigma(x, A, B)
                yield Pi(x, A, B)
