"""Polynomial endofunctors of finite sets.

A signature ``p : E -> B`` determines ``P_p(X) = Σ_{b:B} X^{E_b}``.  Elements
of an extension are :class:`PolyElement` pairs ``(base, section)`` where the
section lists one ``X``-label per element of the fiber ``E_b`` (in fiber
order).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .finset import (
    TERMINAL,
    Family,
    FinMap,
    FinSet,
    FinSetError,
    Label,
    Square,
    all_maps,
    base_change,
    check_pullback,
    compose,
    dependent_sum,
    pullback,
    pushforward,
)


class PolyElement(NamedTuple):
    base: Label
    section: tuple


@dataclass(frozen=True)
class PolySignature:
    family: Family

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "PolySignature":
        return cls(Family.canonical(sizes))

    @property
    def proj(self) -> FinMap:
        return self.family.proj

    @property
    def base(self) -> FinSet:
        return self.family.base

    @property
    def total(self) -> FinSet:
        return self.family.total

    def fiber(self, b: Label) -> tuple:
        return self.family.fiber(b)

    def fiber_sizes(self) -> tuple:
        return self.family.fiber_sizes()

    def to_json(self) -> dict:
        return {"base": len(self.base), "fibers": list(self.fiber_sizes())}

    @classmethod
    def from_json(cls, obj) -> "PolySignature":
        if "proj" in obj:
            from .finset import family_from_json

            return cls(family_from_json(obj))
        fibers = list(obj["fibers"])
        if "base" in obj and obj["base"] != len(fibers):
            raise FinSetError("'base' disagrees with the length of 'fibers'")
        if any((not isinstance(k, int)) or k < 0 for k in fibers):
            raise FinSetError("fiber sizes must be non-negative integers")
        return cls.from_sizes(fibers)


@dataclass(frozen=True)
class PolyTranspose:
    f1: FinMap  # Z -> B
    f2: FinMap  # Z ×_B E -> X


@dataclass(frozen=True)
class CartMorphism:
    """A cartesian square ``f -> g`` (left ``f : B -> A``, right ``g : D -> C``)."""

    square: Square

    def __post_init__(self):
        report = check_pullback(self.square)
        if not report.ok:
            raise FinSetError(f"square is not cartesian ({report.status}: {report.detail})")

    @property
    def source(self) -> PolySignature:
        return PolySignature(Family(self.square.left))

    @property
    def target(self) -> PolySignature:
        return PolySignature(Family(self.square.right))


def sections_over(sig: PolySignature, b: Label, X: FinSet) -> Iterable[tuple]:
    return itertools.product(X.elements, repeat=len(sig.fiber(b)))


def extension_over(sig: PolySignature, X: FinSet, bases: Iterable[Label]) -> FinSet:
    """The part of ``P_sig(X)`` lying over the given base points."""
    return FinSet(
        tuple(PolyElement(b, s) for b in bases for s in sections_over(sig, b, X))
    )


def extension(sig: PolySignature, X: FinSet) -> FinSet:
    return extension_over(sig, X, sig.base.elements)


def extension_size(sig: PolySignature, n: int) -> int:
    return sum(n ** k for k in sig.fiber_sizes())


def extension_on_map(
    sig: PolySignature, h: FinMap, dom: FinSet | None = None, cod: FinSet | None = None
) -> FinMap:
    """``P_sig(h) : (b, s) ↦ (b, h ∘ s)``.

    ``dom``/``cod`` restrict to parts of ``P_sig(X)`` and ``P_sig(Y)``; by
    default the full extensions are used.
    """
    src = dom if dom is not None else extension(sig, h.dom)
    lookup = h._lookup
    table = tuple(PolyElement(b, tuple(lookup[x] for x in s)) for b, s in src.elements)
    if cod is None:
        cod = extension(sig, h.cod) if dom is None else FinSet(tuple(dict.fromkeys(table)))
    return FinMap(src, cod, table)


def is_poly_element(sig: PolySignature, X: FinSet, el: object) -> bool:
    if not isinstance(el, tuple) or len(el) != 2:
        return False
    b, s = el
    if b not in sig.base or not isinstance(s, tuple):
        return False
    return len(s) == len(sig.fiber(b)) and all(x in X for x in s)


def ump_transpose(sig: PolySignature, X: FinSet, f: FinMap) -> PolyTranspose:
    """Split ``f : Z -> P_sig(X)`` into ``f1 : Z -> B`` and ``f2 : Z ×_B E -> X``."""
    for el in f.cod.elements:
        if not is_poly_element(sig, X, el):
            raise FinSetError(f"codomain element {el!r} is not in the extension at X")
    f1 = FinMap(f.dom, sig.base, tuple(el[0] for el in f.table))
    P, _, _ = pullback(f1, sig.proj)
    fam = sig.family
    f2 = FinMap(P, X, tuple(f(z)[1][fam.position(e)] for z, e in P.elements))
    return PolyTranspose(f1, f2)


def ump_untranspose(sig: PolySignature, X: FinSet, tr: PolyTranspose) -> FinMap:
    if tr.f1.cod != sig.base:
        raise FinSetError("f1 must land in the base of the signature")
    P, _, _ = pullback(tr.f1, sig.proj)
    if tr.f2.dom != P:
        raise FinSetError("f2 must be defined on the canonical pullback Z ×_B E")
    table = tuple(
        PolyElement(tr.f1(z), tuple(tr.f2((z, e)) for e in sig.fiber(tr.f1(z))))
        for z in tr.f1.dom.elements
    )
    return FinMap(tr.f1.dom, extension(sig, X), table)


@dataclass(frozen=True)
class ComposedSignature:
    """``p·q`` together with the intermediate data of its construction."""

    signature: PolySignature  # Q -> P_p(C)
    a: FinMap  # P_p(C) -> A
    c: FinMap  # π*B -> C
    pi_b: Family  # π*B over P_p(C)
    q_pulled: Family  # Q over π*B


def compose_signatures(
    p: PolySignature, q: PolySignature, region: Iterable[Label] | None = None
) -> ComposedSignature:
    """Signature of ``P_p ∘ P_q``.

    The base is ``P_p(C)`` (``C`` the base of ``q``); ``region`` optionally
    restricts it to a subset, which is exact because the construction is
    fiberwise.
    """
    C = q.base
    full = extension(p, C) if region is None else None
    base = full if full is not None else FinSet(tuple(region))
    ident = FinMap(base, base, base.elements)
    tr = ump_transpose(p, C, ident)
    a, c = tr.f1, tr.f2
    pi_b = Family(pullback(a, p.proj)[1])
    _, q1, _ = pullback(c, q.proj)
    q_pulled = Family(q1)
    pq = compose(pi_b.proj, q_pulled.proj)
    return ComposedSignature(PolySignature(Family(pq)), a, c, pi_b, q_pulled)


def composition_iso(p: PolySignature, q: PolySignature, X: FinSet, pq: ComposedSignature | None = None) -> FinMap:
    """The canonical bijection ``P_{p·q}(X) -> P_p(P_q(X))``."""
    pq = pq if pq is not None else compose_signatures(p, q)
    sig = pq.signature
    src = extension(sig, X)
    inner = extension(q, X)
    table = []
    for (b0, s), t in src.elements:
        q_fiber = sig.fiber((b0, s))
        groups: dict = {}
        for (pb_el, _d), x in zip(q_fiber, t):
            groups.setdefault(pb_el, []).append(x)
        outer = []
        for e, cval in zip(p.fiber(b0), s):
            outer.append(PolyElement(cval, tuple(groups.get(((b0, s), e), ()))))
        table.append(PolyElement(b0, tuple(outer)))
    return FinMap(src, extension(p, inner), tuple(table))


def pipeline_extension(sig: PolySignature, X: FinSet) -> Family:
    """``P_sig(X)`` computed as ``B_! ∘ p_* ∘ E*`` applied to ``X -> 1`` (a family over 1)."""
    x_over_1 = Family(FinMap.to_terminal(X))
    pulled = base_change(FinMap.to_terminal(sig.total), x_over_1)
    pushed = pushforward(sig.proj, pulled)
    return dependent_sum(FinMap.to_terminal(sig.base), pushed)


def pipeline_to_canonical(sig: PolySignature, X: FinSet) -> FinMap:
    """Relabel the pipeline form into canonical :class:`PolyElement` encoding."""
    fam = pipeline_extension(sig, X)
    table = tuple(PolyElement(b, tuple(x for _, x in s)) for b, s in fam.total.elements)
    return FinMap(fam.total, extension(sig, X), table)


def square_to_nat(m: CartMorphism, X: FinSet) -> FinMap:
    """Component at ``X`` of the cartesian transformation ``P_f => P_g``."""
    sq = m.square
    f_fam, g_fam = Family(sq.left), Family(sq.right)
    src_sig, tgt_sig = PolySignature(f_fam), PolySignature(g_fam)
    table = []
    for a, s in extension(src_sig, X).elements:
        c = sq.bottom(a)
        # h' restricted to the fiber over a is a bijection onto the fiber over h(a)
        moved = {sq.top(e): x for e, x in zip(f_fam.fiber(a), s)}
        table.append(PolyElement(c, tuple(moved[d] for d in g_fam.fiber(c))))
    return FinMap(extension(src_sig, X), extension(tgt_sig, X), tuple(table))


@dataclass(frozen=True)
class CompositionCheck:
    sizes: tuple  # |X| values tried
    extension_sizes: tuple  # |P_{p·q}(X)| per size
    bijective: bool
    natural: bool
    maps_checked: int
    witness: object = None  # (h, element) where naturality fails

    @property
    def ok(self) -> bool:
        return self.bijective and self.natural


def composition_naturality(p: PolySignature, q: PolySignature, sizes: Sequence[int] = (0, 1, 2, 3)) -> CompositionCheck:
    """Check ``P_{p·q}(X) ≅ P_p(P_q(X))`` and its naturality for every map between the given sets."""
    pq = compose_signatures(p, q)
    sets = {n: FinSet.range(n) for n in sizes}
    isos = {n: composition_iso(p, q, sets[n], pq) for n in sizes}
    bijective = all(iso.is_bijective() for iso in isos.values())
    checked = 0
    for m in sizes:
        for n in sizes:
            for h in all_maps(sets[m], sets[n]):
                checked += 1
                left = extension_on_map(pq.signature, h)
                inner = extension_on_map(q, h)
                right = extension_on_map(p, inner)
                for el in left.dom.elements:
                    if isos[n](left(el)) != right(isos[m](el)):
                        return CompositionCheck(tuple(sizes), tuple(len(i.dom) for i in isos.values()), bijective, False, checked, (h.table, el))
    return CompositionCheck(tuple(sizes), tuple(len(i.dom) for i in isos.values()), bijective, True, checked)


def random_signature(rng, max_base: int = 4, max_total: int = 4) -> PolySignature:
    """Base of size ``<= max_base`` with ``<= max_total`` points spread over the fibers."""
    b = rng.randint(0, max_base)
    sizes = [0] * b
    if b:
        for _ in range(rng.randint(0, max_total)):
            sizes[rng.randrange(b)] += 1
    return PolySignature.from_sizes(sizes)


def random_signature_pairs(rng, count: int, max_extension: int, at: int = 3, attempts: int = 10_000) -> list:
    """Seeded pairs whose composite extension at ``|X| = at`` has ``<= max_extension`` elements.

    Larger pairs are redrawn: with four fibers of size four the nested
    extension at three elements is far beyond desk scale.
    """
    out = []
    for _ in range(attempts):
        if len(out) == count:
            break
        p, q = random_signature(rng), random_signature(rng)
        n_q = extension_size(q, at)
        total = sum(n_q ** k for k in p.fiber_sizes())
        if total <= max_extension:
            out.append((p, q))
    if len(out) < count:
        raise FinSetError("could not draw enough signature pairs under the size cap")
    return out
