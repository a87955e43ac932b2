"""Martin-Löf algebras in finite sets.

An :class:`MLAlgebra` is a map ``t : U̇ -> U`` with structure maps for the
unit, Σ and Π type formers.  ``U`` is finite (a bounded prefix of a possibly
infinite base); fibers of ``t`` are produced on demand so that large bounds
stay cheap.  Structure maps are plain callables on labels; the squares they
must form are materialized as :class:`~algtt.finset.Square` objects only over
the region being verified, which is exact because the pullback test is
fiberwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable, Sequence

from .finset import (
    TERMINAL,
    Family,
    FinMap,
    FinSet,
    FinSetError,
    Label,
    PullbackReport,
    Square,
    base_change,
    check_pullback,
    pullback,
)
from .polynomial import PolyElement, PolySignature, compose_signatures, extension_over


class OutOfBoundError(ValueError):
    def __init__(self, operation: str, argument, value, bound: int):
        super().__init__(
            f"{operation}({argument!r}) = {value} does not fit below the bound {bound}"
        )
        self.operation = operation
        self.argument = argument
        self.value = value
        self.bound = bound


class MissingStructureError(ValueError):
    pass


class TypeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EqStructure:
    refl: Callable[[Label], Label]  # U̇ -> U̇
    Eq: Callable[[Label, Label], Label]  # U̇ ×_U U̇ -> U


@dataclass(frozen=True)
class IdStructure:
    """Intensional identity structure; ``J`` maps comparison-pullback elements back.

    When ``J`` is None the structure is taken to be extensional and ``J`` is
    computed as the inverse of the comparison map.
    """

    i: Callable[[Label], Label]
    Id: Callable[[Label, Label], Label]
    J: Callable[[Label], Label] | None = None

    @classmethod
    def from_eq(cls, eq: EqStructure) -> "IdStructure":
        return cls(i=eq.refl, Id=eq.Eq)


@dataclass(frozen=True)
class MLAlgebra:
    name: str
    U: FinSet
    fiber: Callable[[Label], tuple]
    proj: Callable[[Label], Label]
    star: Label
    one: Label
    sigma: Callable[[PolyElement, Label, Label], Label]
    Sigma: Callable[[PolyElement], Label]
    lam: Callable[[PolyElement], Label]
    Pi: Callable[[PolyElement], Label]
    eq: EqStructure | None = None
    bound: int | None = None

    def family(self, bases: Iterable[Label] | None = None) -> Family:
        """``t`` restricted to the given base points (all of ``U`` by default)."""
        base = self.U if bases is None else FinSet(tuple(bases))
        return Family.from_fibers(base, {u: self.fiber(u) for u in base.elements})

    def signature(self, bases: Iterable[Label] | None = None) -> PolySignature:
        return PolySignature(self.family(bases))

    def region(self, max_length: int | None = None, max_entry: int | None = None):
        """Base points and section values of ``U`` considered during verification.

        The bounds select prefixes of ``U`` by position (for the cardinal
        algebra position and value coincide).
        """
        elems = self.U.elements
        bases = elems if max_length is None else elems[: max_length + 1]
        values = elems if max_entry is None else elems[: max_entry + 1]
        return FinSet(bases), FinSet(values)

    def lists(self, max_length: int | None = None, max_entry: int | None = None) -> FinSet:
        """The verified part of ``U₂ = P_t(U)``."""
        bases, values = self.region(max_length, max_entry)
        return extension_over(self.signature(bases), values, bases.elements)

    # -- the three squares ------------------------------------------------------

    def _right(self, bottom_values: Iterable[Label], top_values: Iterable[Label]) -> FinMap:
        wanted = set(bottom_values)
        for u̇ in top_values:
            wanted.add(self.proj(u̇))
        missing = [u for u in wanted if u not in self.U]
        if missing:
            if self.bound is not None:
                raise OutOfBoundError("structure map", None, missing[0], self.bound)
            raise FinSetError(f"value {missing[0]!r} lies outside U")
        base = self.U.subset(lambda u: u in wanted)
        return self.family(base.elements).proj

    def _square(self, TL: FinSet, BL: FinSet, top, left, bottom) -> Square:
        bottom_t = tuple(bottom(x) for x in BL.elements)
        top_t = tuple(top(x) for x in TL.elements)
        right = self._right(bottom_t, top_t)
        return Square(
            top=FinMap(TL, right.dom, top_t),
            bottom=FinMap(BL, right.cod, bottom_t),
            left=FinMap(TL, BL, tuple(left(x) for x in TL.elements)),
            right=right,
        )

    def unit_square(self) -> Square:
        return self._square(TERMINAL, TERMINAL, lambda _: self.star, lambda _: (), lambda _: self.one)

    def sigma_square(self, max_length: int | None = None, max_entry: int | None = None) -> Square:
        bases, values = self.region(max_length, max_entry)
        region = self.lists(max_length, max_entry)
        comp = compose_signatures(self.signature(bases), self.signature(values), region.elements)
        tt = comp.signature.proj

        def top(label):
            ((x, e), d) = label
            return self.sigma(x, e, d)

        return self._square(tt.dom, tt.cod, top, tt, self.Sigma)

    def pi_square(self, max_length: int | None = None, max_entry: int | None = None) -> Square:
        region = self.lists(max_length, max_entry)
        dotted = FinSet(
            tuple(
                PolyElement(n, es)
                for n, s in region.elements
                for es in itertools.product(*(self.fiber(v) for v in s))
            )
        )

        def left(el):
            return PolyElement(el.base, tuple(self.proj(e) for e in el.section))

        return self._square(dotted, region, self.lam, left, self.Pi)

    def structure_squares(self, max_length: int | None = None, max_entry: int | None = None) -> dict:
        return {
            "unit": [("*", self.unit_square())],
            "sigma": [("*", self.sigma_square(max_length, max_entry))],
            "pi": [("*", self.pi_square(max_length, max_entry))],
        }


@dataclass(frozen=True)
class SquareStatus:
    name: str
    status: str  # pass | fail | not-applicable
    fibers_checked: int = 0
    elements_checked: int = 0
    witness: Label = None
    where: Label = None
    detail: str = ""


@dataclass(frozen=True)
class Report:
    squares: tuple

    @property
    def ok(self) -> bool:
        return all(s.status != "fail" for s in self.squares)

    def __getitem__(self, name: str) -> SquareStatus:
        for s in self.squares:
            if s.name == name:
                return s
        raise KeyError(name)


def _summarize(name: str, parts) -> SquareStatus:
    if parts is None:
        return SquareStatus(name, "not-applicable")
    fibers = elems = 0
    for where, sq in parts:
        rep = check_pullback(sq)
        fibers += rep.fibers_checked
        elems += rep.elements_checked
        if not rep.ok:
            return SquareStatus(name, "fail", fibers, elems, rep.witness, where, f"{rep.status}: {rep.detail}")
    return SquareStatus(name, "pass", fibers, elems)


def verify_ml_algebra(alg, **bounds) -> Report:
    """Check every structure square of ``alg`` fiberwise.

    ``alg`` may be an :class:`MLAlgebra` (bounds ``max_length``/``max_entry``)
    or any object exposing ``structure_squares`` (e.g. a presheaf algebra,
    whose squares are checked objectwise).
    """
    squares = alg.structure_squares(**bounds)
    return Report(tuple(_summarize(name, parts) for name, parts in squares.items()))


# -- the finite cardinal algebra ------------------------------------------------


def nat_algebra(bound: int) -> MLAlgebra:
    """``U = {0, …, bound-1}``, ``U̇ = {(n, i) | i < n}``; free monoid monad signature.

    Σ/σ use the offset encoding, Π/λ the mixed-radix encoding (first factor
    most significant); Eq is 1 on the diagonal and 0 elsewhere.
    """
    if bound < 1:
        raise ValueError("the cardinal algebra needs bound >= 1")
    U = FinSet.range(bound)

    def check(op, arg, value):
        if value >= bound:
            raise OutOfBoundError(op, arg, value, bound)
        return value

    def fiber(n):
        return tuple((n, i) for i in range(n))

    def proj(el):
        return el[0]

    def Sigma(x):
        return check("Sigma", x, sum(x.section))

    def sigma(x, e, d):
        total = Sigma(x)
        i = e[1]
        return (total, sum(x.section[:i]) + d[1])

    def Pi(x):
        return check("Pi", x, math.prod(x.section))

    def lam(x):
        total = check("lambda", x, math.prod(e[0] for e in x.section))
        index = 0
        for n, i in x.section:
            index = index * n + i
        return (total, index)

    eq = EqStructure(refl=lambda e: (1, 0), Eq=lambda a, b: 1 if a == b else 0)
    return MLAlgebra(
        name="nat",
        U=U,
        fiber=fiber,
        proj=proj,
        star=(1, 0),
        one=1,
        sigma=sigma,
        Sigma=Sigma,
        lam=lam,
        Pi=Pi,
        eq=eq,
        bound=bound,
    )


def sabotaged_nat_algebra(bound: int) -> MLAlgebra:
    """The cardinal algebra with Σ replaced by ``sum + 1`` (a broken instance)."""
    alg = nat_algebra(bound)

    def Sigma(x):
        value = sum(x.section) + 1
        if value >= bound:
            raise OutOfBoundError("Sigma", x, value, bound)
        return value

    return replace(alg, name="nat-sabotaged", Sigma=Sigma)


def free_monoid_lists(alg: MLAlgebra, X: FinSet, max_length: int) -> FinSet:
    """``P_t(X)`` truncated to lengths ``<= max_length``."""
    bases, _ = alg.region(max_length)
    return extension_over(alg.signature(bases), X, bases.elements)


def flatten(alg: MLAlgebra, xss: PolyElement) -> PolyElement:
    """Monad multiplication ``P_t P_t X -> P_t X`` read off from σ (list concatenation for nat)."""
    n = alg.Sigma(PolyElement(xss.base, tuple(inner.base for inner in xss.section)))
    out = [None] * len(alg.fiber(n))
    outer = PolyElement(xss.base, tuple(inner.base for inner in xss.section))
    fiber_pos = {u̇: k for k, u̇ in enumerate(alg.fiber(n))}
    for e, inner in zip(alg.fiber(xss.base), xss.section):
        for d, x in zip(alg.fiber(inner.base), inner.section):
            out[fiber_pos[alg.sigma(outer, e, d)]] = x
    return PolyElement(n, tuple(out))


# -- Eq and Id ------------------------------------------------------------------


def _eq_square(alg: MLAlgebra, eq: EqStructure, bases: FinSet) -> Square:
    t = alg.family(bases.elements).proj
    P, _, _ = pullback(t, t)
    return alg._square(t.dom, P, eq.refl, lambda x: (x, x), lambda ab: eq.Eq(*ab))


def eq_structure_check(alg: MLAlgebra, eq: EqStructure | None = None, max_base: int | None = None) -> SquareStatus:
    """Check the Eq square over ``U̇ ×_U U̇`` restricted to base points ``<= max_base``."""
    eq = eq if eq is not None else alg.eq
    if eq is None:
        raise MissingStructureError(f"{alg.name} has no Eq structure")
    bases, _ = alg.region(max_base)
    return _summarize("eq", [("*", _eq_square(alg, eq, bases))])


@dataclass(frozen=True)
class IdComparison:
    square: Square  # ρ* naturality square at t
    comparison: FinMap  # P_q U̇ -> P_q U ×_{P_t U} P_t U̇
    J: FinMap
    bijective: bool
    section_law: bool  # comparison ∘ J = id
    retraction_law: bool  # J ∘ comparison = id
    I: Family  # over U̇ ×_U U̇
    rho: FinMap
    q: Family  # I -> U

    @property
    def ok(self) -> bool:
        return self.section_law


def id_comparison(
    alg: MLAlgebra,
    idt: IdStructure | None = None,
    max_base: int | None = None,
    max_entry: int | None = None,
) -> IdComparison:
    """Build ``ρ``, ``q`` and the comparison map of the ρ* naturality square.

    The region covers types ``A`` among the first ``max_base + 1`` base points
    and families ``C`` with values among the first ``max_entry + 1``.
    """
    if idt is None:
        if alg.eq is None:
            raise MissingStructureError(f"{alg.name} has neither Id nor Eq structure")
        idt = IdStructure.from_eq(alg.eq)
    bases, values = alg.region(max_base, max_entry)
    t_b = alg.family(bases.elements)
    pairs, _, _ = pullback(t_b.proj, t_b.proj)
    id_vals = [idt.Id(a, b) for a, b in pairs.elements]
    t_id = alg.family(alg.U.subset(lambda u: u in set(id_vals)).elements)
    id_map = FinMap(pairs, t_id.base, tuple(id_vals))
    I_set, I_to_pairs, _ = pullback(id_map, t_id.proj)
    I = Family(I_to_pairs)
    q = Family(FinMap(I_set, bases, tuple(alg.proj(ab[0]) for ab, _ in I_set.elements)))
    rho = FinMap(t_b.total, I_set, tuple(((x, x), idt.i(x)) for x in t_b.total.elements))
    for x in t_b.total.elements:
        if q.proj(rho(x)) != alg.proj(x):
            raise FinSetError(f"q ∘ ρ differs from t at {x!r}")

    q_sig = PolySignature(q)
    t_sig = alg.signature(bases.elements)
    PqU = extension_over(q_sig, values, bases.elements)
    PqUd = FinSet(
        tuple(
            PolyElement(A, cs)
            for A, C in PqU.elements
            for cs in itertools.product(*(alg.fiber(v) for v in C))
        )
    )

    def restrict(el):
        A, c = el
        by_point = dict(zip(q.fiber(A), c))
        return PolyElement(A, tuple(by_point[rho(x)] for x in t_b.fiber(A)))

    def apply_t(el):
        return PolyElement(el.base, tuple(alg.proj(e) for e in el.section))

    bottom_t = tuple(restrict(el) for el in PqU.elements)
    PtU = FinSet(tuple(dict.fromkeys(bottom_t)))
    PtUd = FinSet(
        tuple(
            PolyElement(A, es)
            for A, s in PtU.elements
            for es in itertools.product(*(alg.fiber(v) for v in s))
        )
    )
    square = Square(
        top=FinMap(PqUd, PtUd, tuple(restrict(el) for el in PqUd.elements)),
        bottom=FinMap(PqU, PtU, bottom_t),
        left=FinMap(PqUd, PqU, tuple(apply_t(el) for el in PqUd.elements)),
        right=FinMap(PtUd, PtU, tuple(apply_t(el) for el in PtUd.elements)),
    )
    P, _, _ = pullback(square.bottom, square.right)
    comparison = FinMap(PqUd, P, tuple((square.left(y), square.top(y)) for y in PqUd.elements))
    bijective = comparison.is_bijective()
    if idt.J is None:
        if not bijective:
            raise FinSetError("extensional J requested but the comparison map is not bijective")
        J = comparison.inverse()
    else:
        J = FinMap(P, PqUd, tuple(idt.J(z) for z in P.elements))
    section_law = all(comparison(J(z)) == z for z in P.elements)
    retraction_law = all(J(comparison(y)) == y for y in PqUd.elements)
    return IdComparison(square, comparison, J, bijective, section_law, retraction_law, I, rho, q)


def j_eliminate(alg: MLAlgebra, cmp: IdComparison, A: Label, C: tuple, c: tuple) -> PolyElement:
    """Identity elimination for one type ``A``.

    ``C`` lists a type over each point of ``I_A`` (in fiber order of ``q``) and
    ``c`` a term of ``C(ρx)`` for each ``x : A``.  Returns ``(A, d)`` with
    ``d : Π_{I_A} C`` whose restriction along ρ is ``c``.
    """
    z = (PolyElement(A, tuple(C)), PolyElement(A, tuple(c)))
    if z not in cmp.J.dom:
        raise TypeMismatchError("(C, c) is not in the comparison pullback: c must lie over C ∘ ρ")
    return cmp.J(z)


# -- comprehension ----------------------------------------------------------------


@dataclass(frozen=True)
class Classified:
    """A family ``a : A -> X`` with a cartesian square into ``t``."""

    family: Family
    alpha: FinMap  # X -> U (corestricted to the values used)
    alpha_dot: FinMap  # A -> U̇
    square: Square


def comprehend(alg: MLAlgebra, alpha: FinMap) -> Classified:
    """Canonical pullback ``α*t``; elements are labelled ``(x, u̇)``."""
    for u in set(alpha.table):
        if u not in alg.U:
            raise FinSetError(f"{u!r} is not in U")
    t = alg.family(alg.U.subset(lambda u: u in set(alpha.table)).elements)
    alpha_c = FinMap(alpha.dom, t.base, alpha.table)
    P, p1, p2 = pullback(alpha_c, t.proj)
    return Classified(Family(p1), alpha_c, p2, Square(top=p2, bottom=alpha_c, left=p1, right=t.proj))


def comprehend_map(alg: MLAlgebra, h: FinMap, alpha: FinMap, beta: FinMap) -> FinMap:
    """The cartesian lift ``ḣ : α*t -> β*t`` of a map ``h : X -> Y`` over ``U``."""
    for x in h.dom.elements:
        if beta(h(x)) != alpha(x):
            raise FinSetError(f"h is not a map over U at {x!r}")
    A = comprehend(alg, alpha).family
    B = comprehend(alg, beta).family
    return FinMap(A.total, B.total, tuple((h(x), e) for x, e in A.total.elements))


# -- Π terms --------------------------------------------------------------------


def pi_formation(alg: MLAlgebra, alpha: FinMap, B: FinMap) -> FinMap:
    """``Π_A B : Γ -> U`` from ``A = α`` and ``B : Γ.A -> U``."""
    ext = comprehend(alg, alpha).family
    if B.dom != ext.total:
        raise TypeMismatchError("B must be defined on the comprehension Γ.A")
    table = tuple(alg.Pi(PolyElement(alpha(x), tuple(B(a) for a in ext.fiber(x)))) for x in alpha.dom.elements)
    return FinMap(alpha.dom, alg.U, table)


def _terms_U̇(alg: MLAlgebra, values: Iterable[Label]) -> FinSet:
    return FinSet(tuple(u̇ for u in dict.fromkeys(values) for u̇ in alg.fiber(u)))


def lambda_intro(alg: MLAlgebra, alpha: FinMap, B: FinMap, b: FinMap) -> FinMap:
    """``λ_A b : Γ -> U̇`` for a term ``b : Γ.A -> U̇`` of type ``B``."""
    ext = comprehend(alg, alpha).family
    if b.dom != ext.total or B.dom != ext.total:
        raise TypeMismatchError("B and b must be defined on the comprehension Γ.A")
    for a in ext.total.elements:
        if alg.proj(b(a)) != B(a):
            raise TypeMismatchError(f"term b does not have type B at {a!r}")
    table = tuple(alg.lam(PolyElement(alpha(x), tuple(b(a) for a in ext.fiber(x)))) for x in alpha.dom.elements)
    return FinMap(alpha.dom, _terms_U̇(alg, (alg.proj(v) for v in table)), table)


def apply_term(alg: MLAlgebra, alpha: FinMap, B: FinMap, term: FinMap) -> FinMap:
    """Application ``t x : Γ.A -> U̇`` for ``t : Π_A B``, via the unique λ-preimage."""
    ext = comprehend(alg, alpha).family
    pi = pi_formation(alg, alpha, B)
    images = {}
    for x in alpha.dom.elements:
        if alg.proj(term(x)) != pi(x):
            raise TypeMismatchError(f"term does not have type Π_A B at {x!r}")
        types = tuple(B(a) for a in ext.fiber(x))
        found = [
            es
            for es in itertools.product(*(alg.fiber(v) for v in types))
            if alg.lam(PolyElement(alpha(x), es)) == term(x)
        ]
        if len(found) != 1:
            raise FinSetError(f"λ-fiber over {term(x)!r} has {len(found)} preimages")
        images.update(zip(ext.fiber(x), found[0]))
    table = tuple(images[a] for a in ext.total.elements)
    return FinMap(ext.total, _terms_U̇(alg, B.table), table)


def check_beta(alg: MLAlgebra, alpha: FinMap, B: FinMap, b: FinMap) -> bool:
    back = apply_term(alg, alpha, B, lambda_intro(alg, alpha, B, b))
    return back.table == b.table


def check_eta(alg: MLAlgebra, alpha: FinMap, B: FinMap, term: FinMap) -> bool:
    again = lambda_intro(alg, alpha, B, apply_term(alg, alpha, B, term))
    return again.table == term.table
