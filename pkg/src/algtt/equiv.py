"""Type equivalences classified over ``U × U``, 2-cells, and type-isomorphism witnesses.

In an extensional algebra a map between fibers has at most one inverse, so
``Equiv`` is stored directly as the family of fiberwise bijections: the label
``((m, n), perm)`` lists, for each point of ``U̇_m`` in fiber order, its image
in ``U̇_n``.  The Σ/Π formula for ``isEquiv`` is kept as an independent count
(:func:`is_equiv_count`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .finset import (
    Family,
    FinMap,
    FinSet,
    FinSetError,
    Label,
    Square,
    base_change,
    check_pullback,
    encode_label,
    exponential_evaluation,
    product,
    slice_exponential,
)
from .mlalg import Classified, MLAlgebra, MissingStructureError, OutOfBoundError, comprehend
from .polynomial import PolyElement


class NotAnEquivalenceError(ValueError):
    def __init__(self, message: str, witness: Label = None):
        super().__init__(message)
        self.witness = witness


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class EquivClassifier:
    alg: MLAlgebra
    pairs: FinSet  # U × U over the region
    dot1: Family  # U̇₁ over U × U, labels ((m, n), u̇) with u̇ over m
    dot2: Family  # U̇₂, labels ((m, n), v̇) with v̇ over n
    exponential: Family  # [U̇₁, U̇₂]
    epsilon: FinMap  # U̇₁ ×_{U×U} [U̇₁, U̇₂] -> U̇₂
    family: Family  # Equiv over U × U
    inclusion: FinMap  # Equiv -> [U̇₁, U̇₂]
    E1: Family  # U̇₁ pulled back to Equiv
    E2: Family
    universal: FinMap  # E1 -> E2 over Equiv

    @property
    def total(self) -> FinSet:
        return self.family.total

    def fiber(self, m: Label, n: Label) -> tuple:
        return self.family.fiber((m, n))

    def fiber_sizes(self) -> dict:
        return {mn: len(self.family.fiber(mn)) for mn in self.pairs.elements}

    # -- groupoid structure -------------------------------------------------------

    def refl(self, u: Label) -> Label:
        return ((u, u), self.alg.fiber(u))

    def sym(self, z: Label) -> Label:
        (m, n), perm = z
        back = {v: u for u, v in zip(self.alg.fiber(m), perm)}
        return ((n, m), tuple(back[v] for v in self.alg.fiber(n)))

    def trans(self, z1: Label, z2: Label) -> Label:
        """Composite ``z2 ∘ z1`` for ``z1`` over ``(l, m)`` and ``z2`` over ``(m, n)``."""
        (l, m), p1 = z1
        (m2, n), p2 = z2
        if m != m2:
            raise BoundaryError(f"cannot compose equivalences over {(l, m)} and {(m2, n)}")
        pos = {v: k for k, v in enumerate(self.alg.fiber(m))}
        return ((l, n), tuple(p2[pos[v]] for v in p1))

    def apply(self, z: Label, u̇: Label) -> Label:
        (m, _), perm = z
        return perm[self.alg.fiber(m).index(u̇)]

    def refl_map(self) -> FinMap:
        U = FinSet(tuple(dict.fromkeys(m for m, _ in self.pairs.elements)))
        return FinMap(U, self.total, tuple(self.refl(u) for u in U.elements))

    def sym_map(self) -> FinMap:
        return FinMap(self.total, self.total, tuple(self.sym(z) for z in self.total.elements))

    def trans_map(self) -> FinMap:
        """``Equiv ×_U Equiv -> Equiv`` on composable pairs."""
        dom = FinSet(
            tuple(
                (z1, z2)
                for z1 in self.total.elements
                for z2 in self.total.elements
                if z1[0][1] == z2[0][0]
            )
        )
        return FinMap(dom, self.total, tuple(self.trans(a, b) for a, b in dom.elements))


def build_equiv(alg: MLAlgebra, max_n: int) -> EquivClassifier:
    """The classifier over ``U × U`` restricted to base points among the first ``max_n + 1``."""
    if alg.eq is None:
        raise MissingStructureError(f"{alg.name} has no Eq structure; Equiv needs identity types")
    bases, _ = alg.region(max_n)
    t = alg.family(bases.elements)
    pairs = product(bases, bases)
    pr1 = FinMap(pairs, bases, tuple(m for m, _ in pairs.elements))
    pr2 = FinMap(pairs, bases, tuple(n for _, n in pairs.elements))
    dot1, dot2 = base_change(pr1, t), base_change(pr2, t)
    exp = slice_exponential(dot1, dot2)
    _, epsilon = exponential_evaluation(dot1, dot2, exp)

    fibers = {}
    for m, n in pairs.elements:
        src, tgt = alg.fiber(m), alg.fiber(n)
        perms = itertools.permutations(tgt) if len(src) == len(tgt) else ()
        fibers[(m, n)] = [((m, n), p) for p in perms]
    family = Family.from_fibers(pairs, fibers)
    inclusion = FinMap(
        family.total,
        exp.total,
        tuple((mn, tuple((mn, v) for v in perm)) for mn, perm in family.total.elements),
    )
    to_pairs = family.proj
    E1, E2 = base_change(to_pairs, dot1), base_change(to_pairs, dot2)
    universal = FinMap(
        E1.total,
        E2.total,
        tuple(
            (z, (z[0], z[1][dot1.position(e)]))
            for z, e in E1.total.elements
        ),
    )
    return EquivClassifier(alg, pairs, dot1, dot2, exp, epsilon, family, inclusion, E1, E2, universal)


def is_equiv_count(alg: MLAlgebra, m: Label, n: Label, images: Sequence[Label]) -> Label:
    """``isEquiv(e) = (Σ_g Π_x Eq(g e x, x)) × (Σ_h Π_y Eq(e h y, y))`` computed in ``alg``.

    ``images`` lists ``e`` on ``U̇_m`` in fiber order.  Every Σ, Π and binary
    product is evaluated with the algebra's own structure maps.
    """
    if alg.eq is None:
        raise MissingStructureError(f"{alg.name} has no Eq structure")
    A, B = alg.fiber(m), alg.fiber(n)
    e = dict(zip(A, images))
    Eq = alg.eq.Eq
    left = []
    for g_img in itertools.product(A, repeat=len(B)):
        g = dict(zip(B, g_img))
        left.append(alg.Pi(PolyElement(m, tuple(Eq(g[e[x]], x) for x in A))))
    right = []
    for h_img in itertools.product(A, repeat=len(B)):
        h = dict(zip(B, h_img))
        right.append(alg.Pi(PolyElement(n, tuple(Eq(e[h[y]], y) for y in B))))
    k = _point_of_size(alg, len(A) ** len(B))
    lsum = alg.Sigma(PolyElement(k, tuple(left)))
    rsum = alg.Sigma(PolyElement(k, tuple(right)))
    return alg.Pi(PolyElement(_point_of_size(alg, 2), (lsum, rsum)))


def _point_of_size(alg: MLAlgebra, k: int) -> Label:
    """A base point whose fiber has ``k`` elements (a k-element index type)."""
    for u in alg.U.elements:
        if len(alg.fiber(u)) == k:
            return u
    raise OutOfBoundError("index type", k, k, alg.bound if alg.bound is not None else len(alg.U))


# -- classifications and lifts ----------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """A family ``a : A -> X`` with a cartesian square ``(α̇, α)`` into ``t``."""

    family: Family
    alpha: FinMap  # X -> U
    alpha_dot: FinMap  # A -> U̇

    def point_over(self, x: Label, u̇: Label) -> Label:
        for a in self.family.fiber(x):
            if self.alpha_dot(a) == u̇:
                return a
        raise FinSetError(f"no point of A over {x!r} is classified by {u̇!r}")


def canonical_classification(alg: MLAlgebra, alpha: FinMap) -> Classification:
    c: Classified = comprehend(alg, alpha)
    return Classification(c.family, c.alpha, c.alpha_dot)


def check_classification(alg: MLAlgebra, cls: Classification) -> bool:
    t = alg.family(cls.alpha.cod.elements)
    sq = Square(
        top=FinMap(cls.alpha_dot.dom, t.total, cls.alpha_dot.table),
        bottom=FinMap(cls.alpha.dom, t.base, cls.alpha.table),
        left=cls.family.proj,
        right=t.proj,
    )
    return check_pullback(sq).ok


def relabel(alg: MLAlgebra, cls: Classification, perms: dict) -> Classification:
    """Another classification of the same ``A``: ``α̇'(a) = perms[x][α̇(a)]``."""
    table = []
    for a in cls.family.total.elements:
        x = cls.family.proj(a)
        u̇ = cls.alpha_dot(a)
        table.append(perms.get(x, {}).get(u̇, u̇))
    dot = FinMap(cls.alpha_dot.dom, cls.alpha_dot.cod, tuple(table))
    out = Classification(cls.family, cls.alpha, dot)
    if not check_classification(alg, out):
        raise FinSetError("relabelling does not give a cartesian square")
    return out


def _check_equivalence_over(e: FinMap, A: Classification, B: Classification) -> None:
    X = A.family.base
    if B.family.base != X:
        raise NotAnEquivalenceError("families live over different contexts")
    for a in A.family.total.elements:
        if B.family.proj(e(a)) != A.family.proj(a):
            raise NotAnEquivalenceError(f"e does not preserve the base point at {a!r}", a)
    for x in X.elements:
        images = [e(a) for a in A.family.fiber(x)]
        if len(set(images)) != len(images) or len(images) != len(B.family.fiber(x)):
            raise NotAnEquivalenceError(f"e is not invertible over {x!r}", x)


def lift_equivalence(ec: EquivClassifier, A: Classification, B: Classification, e: FinMap) -> FinMap:
    """The lift ``X -> Equiv`` of ``(α, β)`` classifying ``e : A ≃ B`` over ``X``."""
    _check_equivalence_over(e, A, B)
    X = A.family.base
    table = []
    for x in X.elements:
        m, n = A.alpha(x), B.alpha(x)
        perm = tuple(B.alpha_dot(e(A.point_over(x, u̇))) for u̇ in ec.alg.fiber(m))
        table.append(((m, n), perm))
    return FinMap(X, ec.total, tuple(table))


def pullback_universal(ec: EquivClassifier, lift: FinMap, A: Classification, B: Classification) -> FinMap:
    """Pull the universal equivalence back along ``lift`` and read it as ``A -> B``."""
    table = []
    for a in A.family.total.elements:
        x = A.family.proj(a)
        z = lift(x)
        if z[0] != (A.alpha(x), B.alpha(x)):
            raise BoundaryError(f"lift at {x!r} does not lie over (α, β)")
        table.append(B.point_over(x, ec.apply(z, A.alpha_dot(a))))
    return FinMap(A.family.total, B.family.total, tuple(table))


def comparison_lift(ec: EquivClassifier, A: Classification, A2: Classification) -> FinMap:
    """``ℓ(α, α')``: the identity of ``A`` seen from classification ``α`` to ``α'``."""
    ident = FinMap.identity(A.family.total)
    return lift_equivalence(ec, A, A2, ident)


def reclassify_equivalence(
    ec: EquivClassifier,
    lift: FinMap,
    A: Classification,
    B: Classification,
    A2: Classification,
    B2: Classification,
) -> FinMap:
    """Move a lift over ``(α, β)`` to one over ``(α', β')`` as ``ℓ(β,β')·(ẽ·ℓ(α',α))``."""
    if A2.family != A.family or B2.family != B.family:
        raise BoundaryError("reclassification must keep the classified families")
    to_old = comparison_lift(ec, A2, A)
    to_new = comparison_lift(ec, B, B2)
    table = tuple(
        ec.trans(ec.trans(to_old(x), lift(x)), to_new(x)) for x in A.family.base.elements
    )
    return FinMap(lift.dom, lift.cod, table)


# -- 2-cells ---------------------------------------------------------------------


@dataclass(frozen=True)
class OneCell:
    """``h : X -> Y`` over ``U`` between classified families."""

    h: FinMap
    A: Classification
    B: Classification

    def check(self) -> Label | None:
        for x in self.h.dom.elements:
            if self.B.alpha(self.h(x)) != self.A.alpha(x):
                return x
        return None

    def lift(self) -> FinMap:
        """The cartesian map ``ḣ : A -> B``."""
        table = []
        for a in self.A.family.total.elements:
            y = self.h(self.A.family.proj(a))
            table.append(self.B.point_over(y, self.A.alpha_dot(a)))
        return FinMap(self.A.family.total, self.B.family.total, tuple(table))


@dataclass(frozen=True)
class TwoCell:
    """``φ : h1 ⇒ h2``: an auto-map of ``A`` over ``X`` with its lift ``X -> Equiv_B``.

    ``lift(x) = ((h1 x, h2 x), z)`` with ``z ∈ Equiv`` over ``(β h1 x, β h2 x)``;
    ``φ`` points from the ``h1`` side to the ``h2`` side.
    """

    h1: OneCell
    h2: OneCell
    phi: FinMap
    lift: FinMap


@dataclass(frozen=True)
class TwoCellReport:
    ok: bool
    check: str = ""
    witness: Label = None


def verify_two_cell(ec: EquivClassifier, tc: TwoCell) -> TwoCellReport:
    A = tc.h1.A
    if tc.h2.A is not A and tc.h2.A != A:
        return TwoCellReport(False, "parallel", None)
    for name, cell in (("h1 over U", tc.h1), ("h2 over U", tc.h2)):
        bad = cell.check()
        if bad is not None:
            return TwoCellReport(False, name, bad)
    a = A.family.proj
    for el in A.family.total.elements:
        if a(tc.phi(el)) != a(el):
            return TwoCellReport(False, "φ over X", el)
    if not tc.phi.is_bijective():
        return TwoCellReport(False, "φ invertible", None)
    B = tc.h1.B
    for x in A.family.base.elements:
        (y1, y2), z = tc.lift(x)
        if (y1, y2) != (tc.h1.h(x), tc.h2.h(x)):
            return TwoCellReport(False, "lift over (h1, h2)", x)
        if z[0] != (B.alpha(y1), B.alpha(y2)):
            return TwoCellReport(False, "lift in Equiv_B", x)
    for el in A.family.total.elements:
        x = a(el)
        z = tc.lift(x)[1]
        expected = A.point_over(x, ec.apply(z, A.alpha_dot(el)))
        if tc.phi(el) != expected:
            return TwoCellReport(False, "φ is the pulled-back universal equivalence", el)
    return TwoCellReport(True)


def make_two_cell(ec: EquivClassifier, h1: OneCell, h2: OneCell, phi: FinMap) -> TwoCell:
    A = h1.A
    a = A.family.proj
    for el in A.family.total.elements:
        if a(phi(el)) != a(el):
            raise NotAnEquivalenceError(f"φ moves {el!r} off its fiber", el)
    table = []
    for x in A.family.base.elements:
        m = A.alpha(x)
        perm = tuple(A.alpha_dot(phi(A.point_over(x, u̇))) for u̇ in ec.alg.fiber(m))
        table.append(((h1.h(x), h2.h(x)), ((m, m), perm)))
    lift_cod = FinSet(tuple(dict.fromkeys(table)))
    return TwoCell(h1, h2, phi, FinMap(A.family.base, lift_cod, tuple(table)))


def auto_equivalences(A: Classification) -> Iterator[FinMap]:
    """Every bijection ``A -> A`` over ``X``, fiber by fiber in lexicographic order."""
    X = A.family.base
    per_fiber = [list(itertools.permutations(A.family.fiber(x))) for x in X.elements]
    for choice in itertools.product(*per_fiber):
        table = {}
        for x, images in zip(X.elements, choice):
            table.update(zip(A.family.fiber(x), images))
        yield FinMap.from_dict(A.family.total, A.family.total, table)


def hom_category(ec: EquivClassifier, h1: OneCell, h2: OneCell) -> list[TwoCell]:
    """All 2-cells ``h1 ⇒ h2``; in bijection with the auto-equivalences of ``A``."""
    return [make_two_cell(ec, h1, h2, phi) for phi in auto_equivalences(h1.A)]


def identity_two_cell(ec: EquivClassifier, h: OneCell) -> TwoCell:
    return make_two_cell(ec, h, h, FinMap.identity(h.A.family.total))


def vertical_compose(ec: EquivClassifier, t1: TwoCell, t2: TwoCell) -> TwoCell:
    """``t2 · t1 : h1 ⇒ h3``; the underlying map is ``φ2 ∘ φ1``."""
    if t1.h2.h != t2.h1.h:
        raise BoundaryError("vertical composition needs t1's target to be t2's source")
    table = tuple(t2.phi(t1.phi(a)) for a in t1.phi.dom.elements)
    return make_two_cell(ec, t1.h1, t2.h2, FinMap(t1.phi.dom, t1.phi.cod, table))


def whisker_left(ec: EquivClassifier, tc: TwoCell, k: OneCell) -> TwoCell:
    """``tc ∘ k : h1 k ⇒ h2 k``, pulling ``φ`` back along ``k : X' -> X``.

    Horizontal structure is not fixed by the underlying theory; this is the
    base-change choice.
    """
    A2 = k.A
    h1 = OneCell(FinMap(k.h.dom, tc.h1.h.cod, tuple(tc.h1.h(k.h(x)) for x in k.h.dom.elements)), A2, tc.h1.B)
    h2 = OneCell(FinMap(k.h.dom, tc.h2.h.cod, tuple(tc.h2.h(k.h(x)) for x in k.h.dom.elements)), A2, tc.h2.B)
    kd = k.lift()
    table = []
    for el in A2.family.total.elements:
        x2 = A2.family.proj(el)
        moved = tc.phi(kd(el))
        table.append(A2.point_over(x2, tc.h1.A.alpha_dot(moved)))
    return make_two_cell(ec, h1, h2, FinMap(A2.family.total, A2.family.total, tuple(table)))


def whisker_right(ec: EquivClassifier, tc: TwoCell, g: OneCell) -> TwoCell:
    """``g ∘ tc : g h1 ⇒ g h2`` with the same ``φ``."""
    A = tc.h1.A
    h1 = OneCell(FinMap(A.family.base, g.h.cod, tuple(g.h(tc.h1.h(x)) for x in A.family.base.elements)), A, g.B)
    h2 = OneCell(FinMap(A.family.base, g.h.cod, tuple(g.h(tc.h2.h(x)) for x in A.family.base.elements)), A, g.B)
    return make_two_cell(ec, h1, h2, tc.phi)


# -- type isomorphisms ------------------------------------------------------------

LAWS = ("sigma-assoc", "sigma-unit-l", "sigma-unit-r", "pi-assoc", "pi-unit")


@dataclass(frozen=True)
class TypeIsoWitness:
    law: str
    lhs_type: Label
    rhs_type: Label
    bijection: FinMap  # U̇ fiber of lhs -> U̇ fiber of rhs
    base_compatible: bool

    @property
    def lhs(self) -> FinSet:
        return self.bijection.dom

    @property
    def rhs(self) -> FinSet:
        return self.bijection.cod

    @property
    def invertible(self) -> bool:
        if not self.bijection.is_bijective():
            return False
        inv = self.bijection.inverse()
        return all(inv(self.bijection(x)) == x for x in self.lhs.elements) and all(
            self.bijection(inv(y)) == y for y in self.rhs.elements
        )

    @property
    def ok(self) -> bool:
        return self.invertible and self.base_compatible

    def to_json(self) -> dict:
        return {
            "law": self.law,
            "lhs": encode_label(self.lhs_type),
            "rhs": encode_label(self.rhs_type),
            "permutation": [self.rhs.index(self.bijection(x)) for x in self.lhs.elements],
        }


@dataclass(frozen=True)
class NestedFamily:
    """``A``, ``B : A -> U`` and ``C : Σ_A B -> U`` as lists of ``U`` values.

    ``B[i]`` is the type over the ``i``-th point of ``A``; ``C[i][j]`` over the
    ``j``-th point of ``B[i]``.
    """

    A: Label
    B: tuple = ()
    C: tuple = ()


def _fiber_index(alg: MLAlgebra, u: Label) -> dict:
    return {v: k for k, v in enumerate(alg.fiber(u))}


def typeiso_witness(law: str, alg: MLAlgebra, data: NestedFamily) -> TypeIsoWitness:
    if law not in LAWS:
        raise ValueError(f"unknown law {law!r}; expected one of {', '.join(LAWS)}")
    fib = alg.fiber
    A_pts = fib(data.A)
    needs_b = law in ("sigma-assoc", "pi-assoc")
    if needs_b:
        if len(data.B) != len(A_pts) or len(data.C) != len(A_pts):
            raise FinSetError("B and C must give one entry per point of A")
        for i, b in enumerate(data.B):
            if len(data.C[i]) != len(fib(b)):
                raise FinSetError(f"C[{i}] must give one type per point of B[{i}]")

    def sigma_of(u, types):
        return PolyElement(u, tuple(types))

    if law == "sigma-assoc":
        inner = [sigma_of(b, data.C[i]) for i, b in enumerate(data.B)]
        outer = sigma_of(data.A, (alg.Sigma(p) for p in inner))
        ab = sigma_of(data.A, data.B)
        s = alg.Sigma(ab)
        c_over = {}
        for i, a in enumerate(A_pts):
            for j, b in enumerate(fib(data.B[i])):
                c_over[alg.sigma(ab, a, b)] = data.C[i][j]
        flat = sigma_of(s, (c_over[p] for p in fib(s)))
        lhs_t, rhs_t = alg.Sigma(outer), alg.Sigma(flat)
        table, lhs_base, rhs_base = {}, {}, {}
        for i, a in enumerate(A_pts):
            for j, b in enumerate(fib(data.B[i])):
                for c in fib(data.C[i][j]):
                    left = alg.sigma(outer, a, alg.sigma(inner[i], b, c))
                    right = alg.sigma(flat, alg.sigma(ab, a, b), c)
                    table[left] = right
                    lhs_base[left] = a
                    rhs_base[right] = a
        bij = FinMap.from_dict(FinSet(fib(lhs_t)), FinSet(fib(rhs_t)), table)
        compatible = all(rhs_base[bij(x)] == lhs_base[x] for x in bij.dom.elements)
        return TypeIsoWitness(law, outer, flat, bij, compatible)

    if law == "sigma-unit-l":
        # Σ_{x:1} A -> A
        p = sigma_of(alg.one, (data.A,))
        star = fib(alg.one)[0]
        table = {alg.sigma(p, star, d): d for d in A_pts}
        bij = FinMap.from_dict(FinSet(fib(alg.Sigma(p))), FinSet(A_pts), table)
        return TypeIsoWitness(law, p, data.A, bij, True)

    if law == "sigma-unit-r":
        # Σ_{a:A} 1 -> A, over A
        p = sigma_of(data.A, (alg.one for _ in A_pts))
        star = fib(alg.one)[0]
        table = {alg.sigma(p, a, star): a for a in A_pts}
        bij = FinMap.from_dict(FinSet(fib(alg.Sigma(p))), FinSet(A_pts), table)
        compatible = all(bij(alg.sigma(p, a, star)) == a for a in A_pts)
        return TypeIsoWitness(law, p, data.A, bij, compatible)

    if law == "pi-unit":
        # Π_{x:1} A -> A
        p = sigma_of(alg.one, (data.A,))
        table = {alg.lam(PolyElement(alg.one, (d,))): d for d in A_pts}
        bij = FinMap.from_dict(FinSet(fib(alg.Pi(p))), FinSet(A_pts), table)
        return TypeIsoWitness(law, p, data.A, bij, True)

    # pi-assoc: currying Π_a Π_b C(a,b) -> Π_{(a,b)} C(a,b)
    ab = sigma_of(data.A, data.B)
    s = alg.Sigma(ab)
    points = []  # (i, j, a, b) in Σ_A B order
    for i, a in enumerate(A_pts):
        for j, b in enumerate(fib(data.B[i])):
            points.append((i, j, a, b))
    by_code = {alg.sigma(ab, a, b): (i, j) for i, j, a, b in points}
    codes = fib(s)
    flat = sigma_of(s, (data.C[by_code[p][0]][by_code[p][1]] for p in codes))
    inner = [sigma_of(b, data.C[i]) for i, b in enumerate(data.B)]
    outer = sigma_of(data.A, (alg.Pi(p) for p in inner))
    lhs_t, rhs_t = alg.Pi(outer), alg.Pi(flat)
    spaces = [fib(data.C[i][j]) for i, j, _, _ in points]
    outer_inv, flat_inv = _lam_inverse(alg, outer), _lam_inverse(alg, flat)
    inner_inv = [_lam_inverse(alg, p) for p in inner]
    code_pos = {p: k for k, p in enumerate(codes)}
    table = {}
    compatible = True
    for values in itertools.product(*spaces):
        f = {(i, j): v for (i, j, _, _), v in zip(points, values)}
        rows = [
            alg.lam(PolyElement(data.B[i], tuple(f[(i, j)] for j in range(len(fib(data.B[i]))))))
            for i in range(len(A_pts))
        ]
        left = alg.lam(PolyElement(data.A, tuple(rows)))
        right = alg.lam(PolyElement(s, tuple(f[by_code[p]] for p in codes)))
        table[left] = right
        # evaluating at (a, b) agrees on both sides
        lhs_rows, rhs_vals = outer_inv[left], flat_inv[right]
        for i, j, a, b in points:
            if inner_inv[i][lhs_rows[i]][j] != rhs_vals[code_pos[alg.sigma(ab, a, b)]]:
                compatible = False
    bij = FinMap.from_dict(FinSet(fib(lhs_t)), FinSet(fib(rhs_t)), table)
    return TypeIsoWitness(law, outer, flat, bij, compatible)


def _lam_inverse(alg: MLAlgebra, family: PolyElement) -> dict:
    """``λ`` on the sections of ``family``, inverted by enumeration."""
    spaces = [alg.fiber(v) for v in family.section]
    inv = {}
    for es in itertools.product(*spaces):
        term = alg.lam(PolyElement(family.base, es))
        if term in inv:
            raise FinSetError(f"λ is not injective over {family!r}")
        inv[term] = es
    return inv


def random_nested_family(rng, law: str, max_fiber: int = 4, max_card: int | None = None, attempts: int = 1000) -> NestedFamily:
    """A random instance for ``law`` with every fiber size ``<= max_fiber``.

    With ``max_card`` set, instances whose types exceed it are redrawn (for
    Π-assoc the sides can reach ``max_fiber ** (max_fiber ** 2)``).
    """
    for _ in range(attempts):
        A = rng.randint(0, max_fiber)
        if law in ("sigma-unit-l", "sigma-unit-r", "pi-unit"):
            return NestedFamily(A)
        B = tuple(rng.randint(0, max_fiber) for _ in range(A))
        C = tuple(tuple(rng.randint(0, max_fiber) for _ in range(b)) for b in B)
        if max_card is None or _nested_card(law, A, B, C) <= max_card:
            return NestedFamily(A, B, C)
    raise FinSetError("no instance within the cardinality cap")


def _nested_card(law: str, A: int, B: tuple, C: tuple) -> int:
    if law == "sigma-assoc":
        return max(sum(sum(row) for row in C), sum(B))
    worst = math.prod(math.prod(row) for row in C)
    return max(worst, sum(B), max((math.prod(row) for row in C), default=1))
