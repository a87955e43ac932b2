"""Presheaves over finite index categories.

Covers Yoneda, categories of elements, representability of natural
transformations, the sieve classifier Ω with its ML-algebra structure, partial
map classifiers, nerves, Hofmann-Streicher universes for tiny κ, and natural
models built from a clan's display maps.

Index categories carry named arrows; ``compose[(g, f)]`` is ``g ∘ f``.  A
presheaf ``X`` stores ``X(c)`` as a :class:`FinSet` and, for each arrow
``f : a -> b``, the restriction ``X(f) : X(b) -> X(a)``.
"""

from __future__ import annotations

import itertools
from dataclasses import InitVar, dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping

from .finset import (
    TERMINAL,
    FinMap,
    FinSet,
    FinSetError,
    Label,
    Square,
    check_pullback,
    compose,
    decode_label,
    encode_label,
    pullback,
)


class CategoryError(ValueError):
    pass


class NotRepresentableError(ValueError):
    pass


# -- index categories -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IndexCategory:
    objects: tuple
    arrows: tuple  # (name, src, dst)
    identities: Mapping[Label, Label]
    compose: Mapping[tuple, Label]  # (g, f) -> g ∘ f

    def __post_init__(self):
        names = [a[0] for a in self.arrows]
        if len(set(names)) != len(names):
            raise CategoryError("arrow names must be distinct")
        if len(set(self.objects)) != len(self.objects):
            raise CategoryError("object names must be distinct")
        for name, s, d in self.arrows:
            if s not in self._objset or d not in self._objset:
                raise CategoryError(f"arrow {name!r} has an unknown endpoint")
        for c in self.objects:
            i = self.identities.get(c)
            if i is None or self.src(i) != c or self.dst(i) != c:
                raise CategoryError(f"object {c!r} lacks an identity endo-arrow")
        for f in names:
            for g in self.out_of(self.dst(f)):
                gf = self.compose.get((g, f))
                if gf is None:
                    raise CategoryError(f"composite {g!r} ∘ {f!r} is missing")
                if gf not in self._ends or self._ends[gf] != (self.src(f), self.dst(g)):
                    raise CategoryError(f"composite {g!r} ∘ {f!r} = {gf!r} has the wrong endpoints")
        for f in names:
            if self.then(self.identities[self.dst(f)], f) != f or self.then(f, self.identities[self.src(f)]) != f:
                raise CategoryError(f"unit law fails at {f!r}")
            for g in self.out_of(self.dst(f)):
                for h in self.out_of(self.dst(g)):
                    if self.then(h, self.then(g, f)) != self.then(self.then(h, g), f):
                        raise CategoryError(f"associativity fails at {h!r}, {g!r}, {f!r}")

    @cached_property
    def _objset(self) -> frozenset:
        return frozenset(self.objects)

    @cached_property
    def _ends(self) -> dict:
        return {name: (s, d) for name, s, d in self.arrows}

    @cached_property
    def _order(self) -> dict:
        return {a[0]: k for k, a in enumerate(self.arrows)}

    @cached_property
    def _hom(self) -> dict:
        out: dict = {}
        for name, s, d in self.arrows:
            out.setdefault((s, d), []).append(name)
        return {k: tuple(v) for k, v in out.items()}

    @property
    def arrow_names(self) -> tuple:
        return tuple(a[0] for a in self.arrows)

    def check_object(self, c: Label) -> None:
        if c not in self._objset:
            raise CategoryError(f"unknown object {c!r}")

    def src(self, f: Label) -> Label:
        return self._ends[f][0]

    def dst(self, f: Label) -> Label:
        return self._ends[f][1]

    def hom(self, a: Label, b: Label) -> tuple:
        return self._hom.get((a, b), ())

    def into(self, c: Label) -> tuple:
        return tuple(name for name, _, d in self.arrows if d == c)

    def out_of(self, c: Label) -> tuple:
        return tuple(name for name, s, _ in self.arrows if s == c)

    def then(self, g: Label, f: Label) -> Label:
        """``g ∘ f``."""
        return self.compose[(g, f)]

    def identity(self, c: Label) -> Label:
        return self.identities[c]

    def is_identity(self, f: Label) -> bool:
        return self.identities.get(self.src(f)) == f

    def sort_arrows(self, arrows: Iterable[Label]) -> tuple:
        return tuple(sorted(set(arrows), key=self._order.__getitem__))

    @classmethod
    def build(
        cls,
        objects: Iterable[Label],
        arrows: Iterable[tuple],
        compose: Mapping[tuple, Label] | None = None,
        identities: Mapping[Label, Label] | None = None,
    ) -> "IndexCategory":
        """Build from non-identity data; identities (named ``id_<obj>``) and their composites are added."""
        objects = tuple(objects)
        arrows = list(arrows)
        ids = dict(identities or {})
        known = {a[0] for a in arrows}
        for c in objects:
            if c not in ids:
                ids[c] = f"id_{c}"
            if ids[c] not in known:
                arrows.insert(0, (ids[c], c, c))
                known.add(ids[c])
        table = dict(compose or {})
        id_names = set(ids.values())
        for name, s, d in arrows:
            table.setdefault((ids[d], name), name)
            table.setdefault((name, ids[s]), name)
        ordered = sorted(arrows, key=lambda a: a[0] not in id_names)
        return cls(objects, tuple(ordered), ids, table)


def terminal_category() -> IndexCategory:
    return IndexCategory.build(["*"], [])


def arrow_category() -> IndexCategory:
    """``0 --u--> 1``."""
    return IndexCategory.build([0, 1], [("u", 0, 1)])


def composable_pair() -> IndexCategory:
    """``0 --f--> 1 --g--> 2`` with ``gf = g ∘ f``."""
    return IndexCategory.build(
        [0, 1, 2],
        [("f", 0, 1), ("g", 1, 2), ("gf", 0, 2)],
        {("g", "f"): "gf"},
    )


def category_to_json(C: IndexCategory) -> dict:
    compose: dict = {}
    for (g, f), gf in C.compose.items():
        if C.is_identity(g) or C.is_identity(f):
            continue
        compose.setdefault(str(g), {})[str(f)] = gf
    return {
        "objects": [encode_label(c) for c in C.objects],
        "arrows": [
            {"name": n, "src": encode_label(s), "dst": encode_label(d)}
            for n, s, d in C.arrows
            if not C.is_identity(n)
        ],
        "identities": {str(c): C.identity(c) for c in C.objects},
        "compose": compose,
    }


def category_from_json(obj: Mapping) -> IndexCategory:
    """Inverse of :func:`category_to_json`; ``identities`` may be omitted."""
    objects = [decode_label(c) for c in obj["objects"]]
    by_str = {str(c): c for c in objects}
    arrows = [(a["name"], decode_label(a["src"]), decode_label(a["dst"])) for a in obj.get("arrows", [])]
    compose = {(g, f): gf for g, row in obj.get("compose", {}).items() for f, gf in row.items()}
    ids = {by_str[k]: v for k, v in obj.get("identities", {}).items()}
    try:
        return IndexCategory.build(objects, arrows, compose, ids)
    except KeyError as exc:
        raise CategoryError(f"unknown object {exc.args[0]!r}") from None


# -- presheaves and natural transformations ---------------------------------------


@dataclass(frozen=True, eq=False)
class Presheaf:
    C: IndexCategory
    at: Mapping[Label, FinSet]
    restrict: Mapping[Label, FinMap]  # f: a -> b gives X(b) -> X(a)
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        if not validate:
            return
        C = self.C
        for c in C.objects:
            if c not in self.at:
                raise CategoryError(f"presheaf is missing the set at {c!r}")
        for f in C.arrow_names:
            r = self.restrict[f]
            if r.dom != self.at[C.dst(f)] or r.cod != self.at[C.src(f)]:
                raise CategoryError(f"restriction along {f!r} has the wrong type")
            if C.is_identity(f) and r.table != r.dom.elements:
                raise CategoryError(f"restriction along identity {f!r} is not the identity")
        for f in C.arrow_names:
            for g in C.out_of(C.dst(f)):
                lhs = self.restrict[C.then(g, f)]
                rhs = compose(self.restrict[f], self.restrict[g])
                if lhs.table != rhs.table:
                    raise CategoryError(f"functoriality fails for {g!r} ∘ {f!r}")

    @classmethod
    def from_function(
        cls,
        C: IndexCategory,
        at: Mapping[Label, Iterable[Label]],
        act: Callable[[Label, Label], Label],
        validate: bool = True,
    ) -> "Presheaf":
        """``act(f, x)`` is ``X(f)(x)`` for ``x`` in ``X(dst f)``."""
        sets = {c: s if isinstance(s, FinSet) else FinSet(tuple(s)) for c, s in at.items()}
        restrict = {
            f: FinMap(sets[C.dst(f)], sets[C.src(f)], tuple(act(f, x) for x in sets[C.dst(f)].elements))
            for f in C.arrow_names
        }
        return cls(C, sets, restrict, validate)

    def act(self, f: Label, x: Label) -> Label:
        return self.restrict[f](x)

    def elements_list(self) -> tuple:
        return tuple((c, x) for c in self.C.objects for x in self.at[c].elements)

    def sizes(self) -> tuple:
        return tuple(len(self.at[c]) for c in self.C.objects)


@dataclass(frozen=True, eq=False)
class PNat:
    src: Presheaf
    tgt: Presheaf
    components: Mapping[Label, FinMap]
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        if not validate:
            return
        if self.src.C is not self.tgt.C:
            raise CategoryError("natural transformation between presheaves on different categories")
        C = self.src.C
        for c in C.objects:
            comp = self.components[c]
            if comp.dom != self.src.at[c] or comp.cod != self.tgt.at[c]:
                raise CategoryError(f"component at {c!r} has the wrong type")
        for f in C.arrow_names:
            a, b = C.src(f), C.dst(f)
            for x in self.src.at[b].elements:
                if self.components[a](self.src.act(f, x)) != self.tgt.act(f, self.components[b](x)):
                    raise CategoryError(f"naturality fails along {f!r} at {x!r}")

    @classmethod
    def from_function(
        cls, src: Presheaf, tgt: Presheaf, fn: Callable[[Label, Label], Label], validate: bool = True
    ) -> "PNat":
        comps = {
            c: FinMap(src.at[c], tgt.at[c], tuple(fn(c, x) for x in src.at[c].elements))
            for c in src.C.objects
        }
        return cls(src, tgt, comps, validate)

    def __call__(self, c: Label, x: Label) -> Label:
        return self.components[c](x)

    @property
    def C(self) -> IndexCategory:
        return self.src.C

    def key(self) -> tuple:
        return tuple(self.components[c].table for c in self.C.objects)

    def is_mono(self) -> bool:
        return all(self.components[c].is_injective() for c in self.C.objects)

    def is_iso(self) -> bool:
        return all(self.components[c].is_bijective() for c in self.C.objects)


def presheaf_to_json(X: Presheaf) -> dict:
    return {
        "category": category_to_json(X.C),
        "at": {str(c): [encode_label(x) for x in X.at[c].elements] for c in X.C.objects},
        "restrict": {
            str(f): [encode_label(y) for y in X.restrict[f].table]
            for f in X.C.arrow_names
            if not X.C.is_identity(f)
        },
    }


def presheaf_from_json(obj: Mapping) -> Presheaf:
    C = category_from_json(obj["category"])
    at = {c: FinSet(tuple(decode_label(x) for x in obj["at"][str(c)])) for c in C.objects}
    restrict = {}
    for f in C.arrow_names:
        dom, cod = at[C.dst(f)], at[C.src(f)]
        if C.is_identity(f):
            restrict[f] = FinMap.identity(dom)
        else:
            restrict[f] = FinMap(dom, cod, tuple(decode_label(y) for y in obj["restrict"][str(f)]))
    return Presheaf(C, at, restrict)


def identity_nat(X: Presheaf) -> PNat:
    return PNat(X, X, {c: FinMap.identity(X.at[c]) for c in X.C.objects}, False)


def compose_nat(g: PNat, f: PNat) -> PNat:
    if f.tgt is not g.src:
        raise CategoryError("natural transformations are not composable")
    return PNat(f.src, g.tgt, {c: compose(g.components[c], f.components[c]) for c in f.C.objects}, False)


def terminal_presheaf(C: IndexCategory) -> Presheaf:
    return Presheaf.from_function(C, {c: TERMINAL for c in C.objects}, lambda f, x: x, False)


def to_terminal(X: Presheaf, one: Presheaf | None = None) -> PNat:
    one = one if one is not None else terminal_presheaf(X.C)
    return PNat.from_function(X, one, lambda c, x: (), False)


def yoneda(C: IndexCategory, c: Label) -> Presheaf:
    """``y(c)(d) = hom(d, c)``; restriction is precomposition."""
    C.check_object(c)
    return Presheaf.from_function(C, {d: C.hom(d, c) for d in C.objects}, lambda f, g: C.then(g, f), False)


def yoneda_map(X: Presheaf, c: Label, x: Label) -> PNat:
    """The natural map ``y(c) -> X`` corresponding to ``x ∈ X(c)``."""
    return PNat.from_function(yoneda(X.C, c), X, lambda d, g: X.act(g, x), False)


def elements(X: Presheaf) -> IndexCategory:
    """The category of elements: objects ``(c, x)``, arrows ``(f, x)`` from ``(a, X(f)x)`` to ``(b, x)``."""
    C = X.C
    arrows = []
    ids = {}
    for f in C.arrow_names:
        a, b = C.src(f), C.dst(f)
        for x in X.at[b].elements:
            arrows.append(((f, x), (a, X.act(f, x)), (b, x)))
            if C.is_identity(f):
                ids[(b, x)] = (f, x)
    table = {}
    for (f, x), _, (b, _x) in arrows:
        for g in C.out_of(b):
            for y in X.at[C.dst(g)].elements:
                if X.act(g, y) == x:
                    table[((g, y), (f, x))] = (C.then(g, f), y)
    return IndexCategory(tuple((c, x) for c, x in X.elements_list()), tuple(arrows), ids, table)


def hom_nat(X: Presheaf, Y: Presheaf) -> Iterator[PNat]:
    """All natural transformations ``X -> Y`` by backtracking over elements."""
    C = X.C
    elems = X.elements_list()
    pos = {e: k for k, e in enumerate(elems)}
    checks: list[list] = [[] for _ in elems]
    for f in C.arrow_names:
        if C.is_identity(f):
            continue
        a, b = C.src(f), C.dst(f)
        for x in X.at[b].elements:
            i, j = pos[(b, x)], pos[(a, X.act(f, x))]
            checks[max(i, j)].append((f, i, j))
    choices = [Y.at[c].elements for c, _ in elems]
    value: list = [None] * len(elems)

    def ok(k: int) -> bool:
        return all(value[j] == Y.act(f, value[i]) for f, i, j in checks[k])

    def build() -> PNat:
        comps = {}
        k = 0
        for c in C.objects:
            n = len(X.at[c])
            comps[c] = FinMap(X.at[c], Y.at[c], tuple(value[k : k + n]))
            k += n
        return PNat(X, Y, comps, False)

    def go(k: int) -> Iterator[PNat]:
        if k == len(elems):
            yield build()
            return
        for y in choices[k]:
            value[k] = y
            if ok(k):
                yield from go(k + 1)
        value[k] = None

    yield from go(0)


def presheaf_pullback(f: PNat, g: PNat) -> tuple[Presheaf, PNat, PNat]:
    """Pointwise canonical pullback; elements are ``(x, y)`` pairs."""
    if f.tgt is not g.tgt:
        raise CategoryError("cospan legs must share a codomain")
    C = f.C
    at = {c: pullback(f.components[c], g.components[c])[0] for c in C.objects}
    P = Presheaf.from_function(C, at, lambda h, xy: (f.src.act(h, xy[0]), g.src.act(h, xy[1])), False)
    p1 = PNat.from_function(P, f.src, lambda c, xy: xy[0], False)
    p2 = PNat.from_function(P, g.src, lambda c, xy: xy[1], False)
    return P, p1, p2


def coproduct_presheaf(parts: Iterable[Presheaf], C: IndexCategory | None = None) -> Presheaf:
    parts = tuple(parts)
    if C is None:
        if not parts:
            raise CategoryError("an empty coproduct needs the index category")
        C = parts[0].C
    at = {c: FinSet(tuple((i, x) for i, X in enumerate(parts) for x in X.at[c].elements)) for c in C.objects}
    return Presheaf.from_function(C, at, lambda f, ix: (ix[0], parts[ix[0]].act(f, ix[1])), False)


# -- representability --------------------------------------------------------------


def fiber_presheaf(p: PNat, c: Label, x: Label) -> Presheaf:
    """Pullback of ``p : Y -> X`` along ``x : y(c) -> X``; elements ``(f, y)``."""
    C, X, Y = p.C, p.tgt, p.src
    at = {
        d: FinSet(tuple((f, y) for f in C.hom(d, c) for y in Y.at[d].elements if p(d, y) == X.act(f, x)))
        for d in C.objects
    }
    return Presheaf.from_function(C, at, lambda h, fy: (C.then(fy[0], h), Y.act(h, fy[1])), False)


def represents(P: Presheaf, d: Label, el: Label) -> bool:
    """Whether ``el ∈ P(d)`` induces an isomorphism ``y(d) ≅ P``."""
    C = P.C
    for e in C.objects:
        images = [P.act(h, el) for h in C.hom(e, d)]
        if len(images) != len(P.at[e]) or len(set(images)) != len(images):
            return False
    return True


def representing_element(P: Presheaf) -> tuple | None:
    for d in P.C.objects:
        for el in P.at[d].elements:
            if represents(P, d, el):
                return d, el
    return None


@dataclass(frozen=True)
class RepresentabilityReport:
    ok: bool
    choices: Mapping  # (c, x) -> (d, (arrow d -> c, element of Y(d)))
    failure: tuple | None = None  # (c, x) with no representing object
    detail: str = ""


def is_representable(p: PNat) -> RepresentabilityReport:
    choices = {}
    for c in p.C.objects:
        for x in p.tgt.at[c].elements:
            P = fiber_presheaf(p, c, x)
            found = representing_element(P)
            if found is None:
                return RepresentabilityReport(
                    False, choices, (c, x), f"pullback along {x!r} at {c!r} has sizes {P.sizes()}"
                )
            choices[(c, x)] = found
    return RepresentabilityReport(True, choices)


@dataclass(frozen=True)
class ContextExtension:
    obj: Label  # Γ.A
    pi: Label  # arrow Γ.A -> Γ
    q: Label  # element of Tm(Γ.A)


def context_extension(p: PNat, gamma: Label, A: Label) -> ContextExtension:
    """The chosen representable pullback of ``tp`` along ``A ∈ Ty(Γ)``."""
    if A not in p.tgt.at[gamma]:
        raise CategoryError(f"{A!r} is not a type in context {gamma!r}")
    found = representing_element(fiber_presheaf(p, gamma, A))
    if found is None:
        raise NotRepresentableError(f"the model is not representable at {A!r} over {gamma!r}")
    d, (pi, q) = found
    if p(d, q) != p.tgt.act(pi, A):
        raise FinSetError("chosen extension does not satisfy tp ∘ q = A ∘ π")
    return ContextExtension(d, pi, q)


def substitution_is_pullback(p: PNat, gamma: Label, A: Label, sigma: Label) -> bool:
    """Check ``y(Δ.A[σ]) ≅ y(Δ) ×_{y(Γ)} y(Γ.A)`` for ``σ : Δ -> Γ``."""
    C = p.C
    if C.dst(sigma) != gamma:
        raise CategoryError("σ must land in Γ")
    delta = C.src(sigma)
    ext = context_extension(p, gamma, A)
    ext_s = context_extension(p, delta, p.tgt.act(sigma, A))
    # the unique h : Δ.A[σ] -> Γ.A with π∘h = σ∘π' and h*q = q'
    target = C.then(sigma, ext_s.pi)
    hs = [
        h
        for h in C.hom(ext_s.obj, ext.obj)
        if C.then(ext.pi, h) == target and p.src.act(h, ext.q) == ext_s.q
    ]
    if len(hs) != 1:
        return False
    h = hs[0]
    y_d, y_g, y_ga = yoneda(C, delta), yoneda(C, gamma), yoneda(C, ext.obj)
    s_map = PNat.from_function(y_d, y_g, lambda e, k: C.then(sigma, k), False)
    pi_map = PNat.from_function(y_ga, y_g, lambda e, k: C.then(ext.pi, k), False)
    P, _, _ = presheaf_pullback(s_map, pi_map)
    return represents(P, ext_s.obj, (ext_s.pi, h))


# -- subobjects and Ω ------------------------------------------------------------


def is_sieve(C: IndexCategory, c: Label, arrows: Iterable[Label]) -> bool:
    S = set(arrows)
    if any(C.dst(f) != c for f in S):
        return False
    return all(C.then(f, g) in S for f in S for g in C.into(C.src(f)))


def sieves(C: IndexCategory, c: Label) -> tuple:
    into = C.into(c)
    out = []
    for mask in range(1 << len(into)):
        S = tuple(f for k, f in enumerate(into) if mask >> k & 1)
        if is_sieve(C, c, S):
            out.append(S)
    return tuple(sorted(out, key=lambda S: (len(S), [C._order[f] for f in S])))


def maximal_sieve(C: IndexCategory, c: Label) -> tuple:
    return C.sort_arrows(C.into(c))


def pullback_sieve(C: IndexCategory, f: Label, S: tuple) -> tuple:
    """``f*S = {g | f ∘ g ∈ S}``."""
    members = set(S)
    return C.sort_arrows(g for g in C.into(C.src(f)) if C.then(f, g) in members)


@dataclass(frozen=True, eq=False)
class Omega:
    presheaf: Presheaf
    top: PNat  # 1 -> Ω

    @property
    def C(self) -> IndexCategory:
        return self.presheaf.C


def omega(C: IndexCategory) -> Omega:
    at = {c: FinSet(sieves(C, c)) for c in C.objects}
    Om = Presheaf.from_function(C, at, lambda f, S: pullback_sieve(C, f, S), False)
    top = PNat.from_function(terminal_presheaf(C), Om, lambda c, _: maximal_sieve(C, c), False)
    return Omega(Om, top)


Subobject = tuple  # one frozenset per object, in object order


def is_subobject(X: Presheaf, sub: Subobject) -> bool:
    C = X.C
    parts = dict(zip(C.objects, sub))
    for c in C.objects:
        if not parts[c] <= set(X.at[c].elements):
            return False
    return all(X.act(f, x) in parts[C.src(f)] for f in C.arrow_names for x in parts[C.dst(f)])


def subobjects(X: Presheaf) -> Iterator[Subobject]:
    C = X.C
    per_object = []
    for c in C.objects:
        xs = X.at[c].elements
        per_object.append(
            [frozenset(s) for r in range(len(xs) + 1) for s in itertools.combinations(xs, r)]
        )
    for sub in itertools.product(*per_object):
        if is_subobject(X, sub):
            yield tuple(sub)


def subpresheaf(X: Presheaf, sub: Subobject) -> tuple[Presheaf, PNat]:
    if not is_subobject(X, sub):
        raise CategoryError("not a subpresheaf: a subset fails to be closed under restriction")
    parts = dict(zip(X.C.objects, sub))
    at = {c: X.at[c].subset(lambda x, c=c: x in parts[c]) for c in X.C.objects}
    S = Presheaf.from_function(X.C, at, X.act, False)
    return S, PNat.from_function(S, X, lambda c, x: x, False)


def classify_subobject(X: Presheaf, sub: Subobject, om: Omega | None = None) -> PNat:
    """``χ_c(x) = {f : d -> c | X(f)(x) ∈ S(d)}``."""
    if not is_subobject(X, sub):
        raise CategoryError("not a subpresheaf: a subset fails to be closed under restriction")
    C = X.C
    om = om if om is not None else omega(C)
    parts = dict(zip(C.objects, sub))

    def chi(c, x):
        return C.sort_arrows(f for f in C.into(c) if X.act(f, x) in parts[C.src(f)])

    return PNat.from_function(X, om.presheaf, chi, False)


def image_subobject(m: PNat) -> Subobject:
    return tuple(frozenset(m.components[c].table) for c in m.C.objects)


def classify_mono(m: PNat, om: Omega | None = None) -> PNat:
    if not m.is_mono():
        raise CategoryError("map is not monic")
    return classify_subobject(m.tgt, image_subobject(m), om)


def subobject_of(chi: PNat) -> Subobject:
    """Pull ``⊤`` back along ``χ``."""
    C = chi.C
    return tuple(
        frozenset(x for x in chi.src.at[c].elements if chi(c, x) == maximal_sieve(C, c)) for c in C.objects
    )


@dataclass(frozen=True)
class ClassificationCheck:
    subobjects: int
    maps: int
    bijective: bool


def check_subobject_classification(X: Presheaf, om: Omega | None = None) -> ClassificationCheck:
    om = om if om is not None else omega(X.C)
    subs = list(subobjects(X))
    maps = {chi.key() for chi in hom_nat(X, om.presheaf)}
    images = []
    roundtrip = True
    for sub in subs:
        chi = classify_subobject(X, sub, om)
        images.append(chi.key())
        roundtrip &= subobject_of(chi) == sub
    bijective = roundtrip and len(set(images)) == len(images) and set(images) == maps
    return ClassificationCheck(len(subs), len(maps), bijective)


def diagonal_classifier(X: Presheaf, om: Omega | None = None) -> PNat:
    """Classifier of ``δ : X -> X × X``."""
    C = X.C
    at = {c: FinSet(tuple(itertools.product(X.at[c].elements, repeat=2))) for c in C.objects}
    XX = Presheaf.from_function(C, at, lambda f, ab: (X.act(f, ab[0]), X.act(f, ab[1])), False)
    diag = tuple(frozenset((x, x) for x in X.at[c].elements) for c in C.objects)
    return classify_subobject(XX, diag, om)


def all_presheaves(C: IndexCategory, max_size: int) -> Iterator[Presheaf]:
    """Every presheaf with ``X(c) = {0..n_c-1}``, ``n_c <= max_size`` (labelled, not up to iso)."""
    plain = [f for f in C.arrow_names if not C.is_identity(f)]
    for sizes in itertools.product(range(max_size + 1), repeat=len(C.objects)):
        at = {c: FinSet.range(n) for c, n in zip(C.objects, sizes)}
        spaces = [itertools.product(range(len(at[C.src(f)])), repeat=len(at[C.dst(f)])) for f in plain]
        for tables in itertools.product(*spaces):
            restrict = {f: FinMap.identity(at[C.src(f)]) for f in C.arrow_names if C.is_identity(f)}
            restrict.update(
                {f: FinMap(at[C.dst(f)], at[C.src(f)], t) for f, t in zip(plain, tables)}
            )
            try:
                yield Presheaf(C, at, restrict)
            except CategoryError:
                continue


# -- polynomial extension of presheaves ------------------------------------------


@dataclass(frozen=True, eq=False)
class PresheafExtension:
    """``P_p(X)``: elements ``(b, φ)`` with ``φ`` natural on the fiber of ``p`` over ``b``."""

    presheaf: Presheaf
    signature: PNat
    X: Presheaf
    fibers: Mapping[tuple, Presheaf]  # (c, b) -> fiber presheaf

    def fiber_index(self, c: Label, b: Label) -> dict:
        F = self.fibers[(c, b)]
        return {el: k for k, el in enumerate(F.elements_list())}

    def evaluate(self, c: Label, el: tuple, d: Label, point: tuple) -> Label:
        """``φ`` at ``point = (f, e)`` of the fiber at object ``d``."""
        b, phi = el
        return phi[self.fiber_index(c, b)[(d, point)]]


def poly_extension(p: PNat, X: Presheaf) -> PresheafExtension:
    C = p.C
    fibers = {}
    at = {}
    for c in C.objects:
        elems = []
        for b in p.tgt.at[c].elements:
            F = fiber_presheaf(p, c, b)
            fibers[(c, b)] = F
            for phi in hom_nat(F, X):
                elems.append((b, tuple(y for comp in phi.key() for y in comp)))
        at[c] = FinSet(tuple(elems))
    index = {key: {el: k for k, el in enumerate(F.elements_list())} for key, F in fibers.items()}

    def act(g, el):
        b, phi = el
        c = C.dst(g)
        b2 = p.tgt.act(g, b)
        src_index = index[(c, b)]
        F2 = fibers[(C.src(g), b2)]
        return (b2, tuple(phi[src_index[(d, (C.then(g, f), e))]] for d, (f, e) in F2.elements_list()))

    return PresheafExtension(Presheaf.from_function(C, at, act, False), p, X, fibers)


def poly_extension_map(
    p: PNat, h: PNat, src: PresheafExtension | None = None, tgt: PresheafExtension | None = None
) -> PNat:
    """``P_p(h) : (b, φ) ↦ (b, h ∘ φ)``."""
    src = src if src is not None else poly_extension(p, h.src)
    tgt = tgt if tgt is not None else poly_extension(p, h.tgt)

    def fn(c, el):
        b, phi = el
        F = src.fibers[(c, b)]
        return (b, tuple(h(d, y) for (d, _), y in zip(F.elements_list(), phi)))

    return PNat.from_function(src.presheaf, tgt.presheaf, fn, False)


@dataclass(frozen=True, eq=False)
class ComposedPresheafSignature:
    signature: PNat  # Q -> P_p(C_q)
    base: PresheafExtension


def compose_presheaf_signatures(p: PNat, q: PNat) -> ComposedPresheafSignature:
    """``p·q``: elements ``(((b, φ), e), d)`` with ``p(e) = b`` and ``q(d) = φ(id, e)``."""
    C = p.C
    base = poly_extension(p, q.tgt)
    E, D = p.src, q.src
    at = {}
    for c in C.objects:
        ident = C.identity(c)
        elems = []
        for el in base.presheaf.at[c].elements:
            b, _ = el
            for e in E.at[c].elements:
                if p(c, e) != b:
                    continue
                target = base.evaluate(c, el, c, (ident, e))
                elems.extend((((el, e), d) for d in D.at[c].elements if q(c, d) == target))
        at[c] = FinSet(tuple(elems))

    def act(g, label):
        (el, e), d = label
        return ((base.presheaf.act(g, el), E.act(g, e)), D.act(g, d))

    Q = Presheaf.from_function(C, at, act, False)
    sig = PNat.from_function(Q, base.presheaf, lambda c, label: label[0][0], False)
    return ComposedPresheafSignature(sig, base)


@dataclass(frozen=True, eq=False)
class PartialMapClassifier:
    extension: PresheafExtension
    eta: PNat  # X -> X̃
    omega: Omega

    @property
    def presheaf(self) -> Presheaf:
        return self.extension.presheaf


def partial_map_classifier(X: Presheaf, om: Omega | None = None) -> PartialMapClassifier:
    """``X̃ = P_⊤(X)`` with the unit ``η : X -> X̃``."""
    C = X.C
    om = om if om is not None else omega(C)
    ext = poly_extension(om.top, X)

    def eta(c, x):
        top = maximal_sieve(C, c)
        F = ext.fibers[(c, top)]
        return (top, tuple(X.act(f, x) for _, (f, _) in F.elements_list()))

    e = PNat.from_function(X, ext.presheaf, eta)
    if not e.is_mono():
        raise FinSetError("η is not monic")
    return PartialMapClassifier(ext, e, om)


def partial_maps(Y: Presheaf, X: Presheaf) -> Iterator[tuple[Subobject, PNat]]:
    for sub in subobjects(Y):
        S, _ = subpresheaf(Y, sub)
        for f in hom_nat(S, X):
            yield sub, f


def classify_partial_map(pmc: PartialMapClassifier, Y: Presheaf, sub: Subobject, f: PNat) -> PNat:
    """The map ``Y -> X̃`` sending ``y`` to ``(χ_S(y), z ↦ f(z))``."""
    C = Y.C
    chi = classify_subobject(Y, sub, pmc.omega)
    ext = pmc.extension

    def fn(c, y):
        S = chi(c, y)
        F = ext.fibers[(c, S)]
        return (S, tuple(f(d, Y.act(g, y)) for d, (g, _) in F.elements_list()))

    return PNat.from_function(Y, ext.presheaf, fn, False)


def check_partial_map_bijection(Y: Presheaf, X: Presheaf, pmc: PartialMapClassifier | None = None) -> bool:
    pmc = pmc if pmc is not None else partial_map_classifier(X)
    images = [classify_partial_map(pmc, Y, sub, f).key() for sub, f in partial_maps(Y, X)]
    maps = {m.key() for m in hom_nat(Y, pmc.presheaf)}
    return len(set(images)) == len(images) and set(images) == maps


# -- the Ω-algebra ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PresheafAlgebra:
    """An ML-algebra in presheaves; squares are checked objectwise."""

    C: IndexCategory
    t: PNat
    star: PNat
    one: PNat
    tt: PNat  # U̇₂ -> U₂
    sigma: PNat
    Sigma: PNat
    pt: PNat  # P_t(U̇) -> P_t(U)
    lam: PNat
    Pi: PNat
    refl: PNat | None = None
    Eq: PNat | None = None
    diag: PNat | None = None  # U̇ -> U̇ ×_U U̇

    def _squares(self, top: PNat, bottom: PNat, left: PNat, right: PNat) -> list:
        return [
            (c, Square(top.components[c], bottom.components[c], left.components[c], right.components[c]))
            for c in self.C.objects
        ]

    def structure_squares(self, **_bounds) -> dict:
        one = self.star.src
        ident = identity_nat(one)
        return {
            "unit": self._squares(self.star, self.one, ident, self.t),
            "sigma": self._squares(self.sigma, self.Sigma, self.tt, self.t),
            "pi": self._squares(self.lam, self.Pi, self.pt, self.t),
        }

    def eq_squares(self) -> list:
        if self.Eq is None:
            return []
        return self._squares(self.refl, self.Eq, self.diag, self.t)


def omega_algebra(C: IndexCategory) -> PresheafAlgebra:
    om = omega(C)
    one = om.top.src
    top = om.top
    comp = compose_presheaf_signatures(top, top)
    tt = comp.signature
    if not tt.is_mono():
        raise FinSetError("⊤·⊤ is not monic")
    Sigma = classify_mono(tt, om)
    sigma = to_terminal(tt.src, one)
    pt_src = poly_extension(top, one)
    pt = poly_extension_map(top, top, pt_src, poly_extension(top, om.presheaf))
    if not pt.is_mono():
        raise FinSetError("P_⊤(⊤) is not monic")
    Pi = classify_mono(pt, om)
    lam = to_terminal(pt.src, one)
    pairs, _, _ = presheaf_pullback(top, top)
    diag = PNat.from_function(one, pairs, lambda c, x: (x, x), False)
    Eq = PNat.from_function(pairs, om.presheaf, lambda c, _: maximal_sieve(C, c), False)
    return PresheafAlgebra(
        C, top, identity_nat(one), top, tt, sigma, Sigma, pt, lam, Pi, identity_nat(one), Eq, diag
    )


# -- functors, slices, nerves ----------------------------------------------------


@dataclass(frozen=True)
class Functor:
    objects: tuple  # images, aligned with the source's objects
    arrows: tuple  # images, aligned with the source's arrows


def functors(A: IndexCategory, B: IndexCategory) -> Iterator[Functor]:
    """All functors ``A -> B``, pruning on composition constraints as arrows are assigned."""
    obj_pos = {c: k for k, c in enumerate(A.objects)}
    names = A.arrow_names
    pos = {f: k for k, f in enumerate(names)}
    checks: list[list] = [[] for _ in names]
    for f in names:
        for g in A.out_of(A.dst(f)):
            gf = A.then(g, f)
            checks[max(pos[f], pos[g], pos[gf])].append((pos[g], pos[f], pos[gf]))

    for objs in itertools.product(B.objects, repeat=len(A.objects)):
        img = [None] * len(names)

        def candidates(f):
            s, d = objs[obj_pos[A.src(f)]], objs[obj_pos[A.dst(f)]]
            if A.is_identity(f):
                return (B.identity(s),)
            return B.hom(s, d)

        def go(k):
            if k == len(names):
                yield Functor(objs, tuple(img))
                return
            for b in candidates(names[k]):
                img[k] = b
                if all(B.then(img[g], img[f]) == img[gf] for g, f, gf in checks[k]):
                    yield from go(k + 1)
            img[k] = None

        yield from go(0)


def slice_category(C: IndexCategory, c: Label) -> IndexCategory:
    """``C/c``: objects are arrows into ``c``; arrows ``(f, g, f')`` with ``f' ∘ g = f``."""
    objs = C.into(c)
    arrows = []
    ids = {}
    for f in objs:
        for f2 in objs:
            for g in C.hom(C.src(f), C.src(f2)):
                if C.then(f2, g) == f:
                    arrows.append(((f, g, f2), f, f2))
                    if C.is_identity(g):
                        ids[f] = (f, g, f2)
    table = {}
    for (f, g, f2), _, _ in arrows:
        for (_f2, g2, f3), s, _ in arrows:
            if s == f2:
                table[((f2, g2, f3), (f, g, f2))] = (f, C.then(g2, g), f3)
    return IndexCategory(objs, tuple(arrows), ids, table)


def nerve(C: IndexCategory, D: IndexCategory) -> Presheaf:
    """``ν_C(D)(c)`` = functors ``C/c -> D``; restriction is precomposition with post-composition."""
    slices = {c: slice_category(C, c) for c in C.objects}
    at = {c: FinSet(tuple(functors(slices[c], D))) for c in C.objects}

    def act(h, F):
        big, small = slices[C.dst(h)], slices[C.src(h)]
        opos = {f: k for k, f in enumerate(big.objects)}
        apos = {a: k for k, a in enumerate(big.arrow_names)}
        objs = tuple(F.objects[opos[C.then(h, f)]] for f in small.objects)
        arrs = tuple(F.arrows[apos[(C.then(h, f), g, C.then(h, f2))]] for f, g, f2 in small.arrow_names)
        return Functor(objs, arrs)

    return Presheaf.from_function(C, at, act, False)


def nerve_map(C: IndexCategory, F: Functor, D: IndexCategory, E: IndexCategory, src: Presheaf, tgt: Presheaf) -> PNat:
    """``ν_C(F) : ν_C(D) -> ν_C(E)`` by post-composition."""
    dpos = {d: k for k, d in enumerate(D.objects)}
    apos = {a: k for k, a in enumerate(D.arrow_names)}

    def fn(c, G):
        return Functor(
            tuple(F.objects[dpos[x]] for x in G.objects), tuple(F.arrows[apos[a]] for a in G.arrows)
        )

    return PNat.from_function(src, tgt, fn, False)


def elements_nerve_bijection(X: Presheaf, D: IndexCategory) -> bool:
    """``Hom_Cat(∫X, D) ≅ Hom_psh(X, ν D)`` via ``F ↦ (x ↦ (f ↦ F(a, X(f)x)))``."""
    C = X.C
    el = elements(X)
    N = nerve(C, D)
    slices = {c: slice_category(C, c) for c in C.objects}
    opos = {o: k for k, o in enumerate(el.objects)}
    apos = {a: k for k, a in enumerate(el.arrow_names)}
    images = []
    for F in functors(el, D):

        def fn(c, x, F=F):
            S = slices[c]
            objs = tuple(F.objects[opos[(C.src(f), X.act(f, x))]] for f in S.objects)
            arrs = tuple(F.arrows[apos[(g, X.act(f2, x))]] for _f, g, f2 in S.arrow_names)
            return Functor(objs, arrs)

        images.append(PNat.from_function(X, N, fn).key())
    maps = {m.key() for m in hom_nat(X, N)}
    return len(set(images)) == len(images) and set(images) == maps


def finite_sets_op(kappa: int) -> IndexCategory:
    """Skeletal ``Set_κ^op``: objects ``n < κ``; an arrow ``n -> m`` is a function ``m -> n``."""
    objs = tuple(range(kappa))
    arrows = []
    ids = {}
    for n in objs:
        for m in objs:
            for table in itertools.product(range(n), repeat=m):
                arrows.append(((n, m, table), n, m))
        ids[n] = (n, n, tuple(range(n)))
    comp = {}
    for (n, m, t1), _, _ in arrows:
        for (m2, k, t2), _, _ in arrows:
            if m2 == m:
                comp[((m, k, t2), (n, m, t1))] = (n, k, tuple(t1[i] for i in t2))
    return IndexCategory(objs, tuple(arrows), ids, comp)


def pointed_finite_sets_op(kappa: int) -> IndexCategory:
    """Skeletal pointed ``Set•_κ^op``: objects ``(n, i)``; arrows are point-preserving functions reversed."""
    objs = tuple((n, i) for n in range(1, kappa) for i in range(n))
    arrows = []
    ids = {}
    for n, i in objs:
        for m, j in objs:
            for table in itertools.product(range(n), repeat=m):
                if table[j] == i:
                    arrows.append((((n, i), (m, j), table), (n, i), (m, j)))
        ids[(n, i)] = ((n, i), (n, i), tuple(range(n)))
    comp = {}
    for (a, b, t1), _, _ in arrows:
        for (b2, c, t2), _, _ in arrows:
            if b2 == b:
                comp[((b, c, t2), (a, b, t1))] = (a, c, tuple(t1[i] for i in t2))
    return IndexCategory(objs, tuple(arrows), ids, comp)


@dataclass(frozen=True, eq=False)
class HSUniverse:
    kappa: int
    V: Presheaf
    Vdot: Presheaf
    t: PNat

    @property
    def C(self) -> IndexCategory:
        return self.V.C

    def structure_squares(self, **_bounds) -> dict:
        """The unit square always; Σ and Π only at κ = 2, by transport from Ω.

        For finite κ > 2 the universe is not closed under Σ or Π (2 + 2 and
        2 · 2 exceed 3), so those squares are reported as not applicable.
        """
        C = self.C
        one = terminal_presheaf(C)
        star = PNat.from_function(one, self.Vdot, lambda c, _: self.Vdot.at[c].elements[0], False)
        unit_top = PNat.from_function(one, self.V, lambda c, _: self.t(c, star(c, ())), False)
        squares = {
            "unit": [
                (c, Square(star.components[c], unit_top.components[c], FinMap.identity(one.at[c]), self.t.components[c]))
                for c in C.objects
            ]
        }
        if self.kappa != 2:
            squares.update(sigma=None, pi=None)
            return squares
        alg = omega_algebra(C)
        back = hs_omega_iso(self).components
        for name, (top, bottom, left) in {
            "sigma": (alg.sigma, alg.Sigma, alg.tt),
            "pi": (alg.lam, alg.Pi, alg.pt),
        }.items():
            parts = []
            for c in C.objects:
                inv = back[c].inverse()
                dot = self.Vdot.at[c].elements[0]
                parts.append(
                    (
                        c,
                        Square(
                            FinMap(top.src.at[c], self.Vdot.at[c], tuple(dot for _ in top.src.at[c].elements)),
                            compose(inv, bottom.components[c]),
                            left.components[c],
                            self.t.components[c],
                        ),
                    )
                )
            squares[name] = parts
        return squares


def hs_universe(C: IndexCategory, kappa: int) -> HSUniverse:
    if kappa not in (2, 3):
        raise ValueError("κ must be 2 or 3")
    D, Ddot = finite_sets_op(kappa), pointed_finite_sets_op(kappa)
    forget = Functor(
        tuple(n for n, _ in Ddot.objects),
        tuple((a[0], b[0], table) for a, b, table in Ddot.arrow_names),
    )
    V, Vdot = nerve(C, D), nerve(C, Ddot)
    return HSUniverse(kappa, V, Vdot, nerve_map(C, forget, Ddot, D, Vdot, V))


def hs_omega_iso(hs: HSUniverse, om: Omega | None = None) -> PNat:
    """``V₂ -> Ω`` sending a functor ``F : C/c -> 𝟚`` to the sieve ``{f | F(f) = 1}``."""
    if hs.kappa != 2:
        raise ValueError("the comparison with Ω needs κ = 2")
    C = hs.C
    om = om if om is not None else omega(C)

    def fn(c, F):
        return C.sort_arrows(f for f, n in zip(C.into(c), F.objects) if n == 1)

    iso = PNat.from_function(hs.V, om.presheaf, fn)
    if not iso.is_iso():
        raise FinSetError("V₂ -> Ω is not an isomorphism")
    return iso


# -- natural models from display maps ---------------------------------------------


def clan_model(C: IndexCategory, display: Iterable[Label]) -> PNat:
    """``⊔_{d ∈ D} y(dom d) -> ⊔_{d ∈ D} y(cod d)``; labels ``(d, arrow)``."""
    display = tuple(display)
    for d in display:
        if d not in C._ends:
            raise CategoryError(f"display arrow {d!r} is not in the category")
    tm = {c: FinSet(tuple((d, g) for d in display for g in C.hom(c, C.src(d)))) for c in C.objects}
    ty = {c: FinSet(tuple((d, h) for d in display for h in C.hom(c, C.dst(d)))) for c in C.objects}
    act = lambda k, dg: (dg[0], C.then(dg[1], k))  # noqa: E731
    Tm = Presheaf.from_function(C, tm, act, False)
    Ty = Presheaf.from_function(C, ty, act, False)
    return PNat.from_function(Tm, Ty, lambda c, dg: (dg[0], C.then(dg[0], dg[1])), False)


def discrete_pnat(C: IndexCategory, f: FinMap) -> PNat:
    """A map of sets as a natural transformation over a one-object discrete category."""
    if len(C.objects) != 1 or len(C.arrows) != 1:
        raise CategoryError("needs a category with one object and only its identity")
    (c,) = C.objects
    X = Presheaf.from_function(C, {c: f.dom}, lambda _, x: x, False)
    Y = Presheaf.from_function(C, {c: f.cod}, lambda _, x: x, False)
    return PNat(X, Y, {c: f}, False)


def pnat_squares_ok(parts) -> bool:
    return all(check_pullback(sq).ok for _, sq in parts)
