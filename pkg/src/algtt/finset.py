"""Finite sets as a locally cartesian closed category.

Objects are :class:`FinSet` (an ordered tuple of distinct hashable labels),
arrows are :class:`FinMap` (total tables).  A :class:`Family` is an object of
a slice, i.e. a map together with its fibers.  Everything here is immutable
and exhaustive; the other modules use these operations as their ground truth.

Canonical choices:

* ``pullback`` enumerates pairs ``(a, b)`` in lexicographic order of the
  positions of ``a`` and ``b`` in their domains.
* sections and functions are encoded as tuples ordered by the enumeration
  order of the fiber they are defined on.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence

Label = Hashable


class FinSetError(ValueError):
    """Raised on malformed finite data or boundary mismatches."""


class CompositionError(FinSetError):
    pass


class NotCommutingError(FinSetError):
    """A square whose two composites differ; carries the first witness."""

    def __init__(self, message: str, witness: Label = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class FinSet:
    elements: tuple = ()

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if len(set(elements)) != len(elements):
            seen = set()
            for x in elements:
                if x in seen:
                    raise FinSetError(f"duplicate label {x!r}")
                seen.add(x)

    @classmethod
    def range(cls, n: int) -> "FinSet":
        return cls(tuple(range(n)))

    @cached_property
    def _index(self) -> dict:
        return {x: i for i, x in enumerate(self.elements)}

    def index(self, x: Label) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise FinSetError(f"{x!r} is not an element") from None

    def __contains__(self, x: object) -> bool:
        try:
            return x in self._index
        except TypeError:
            return False

    def __iter__(self) -> Iterator:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        if len(self.elements) > 8:
            return f"FinSet(<{len(self.elements)} elements>)"
        return f"FinSet({list(self.elements)!r})"

    def subset(self, keep: Callable[[Label], bool]) -> "FinSet":
        return FinSet(tuple(x for x in self.elements if keep(x)))


TERMINAL = FinSet(((),))
EMPTY = FinSet(())


@dataclass(frozen=True, eq=False)
class FinMap:
    """A total function ``dom -> cod``; ``table`` is aligned with ``dom``."""

    dom: FinSet
    cod: FinSet
    table: tuple

    def __post_init__(self):
        table = tuple(self.table)
        object.__setattr__(self, "table", table)
        if len(table) != len(self.dom):
            raise FinSetError("table length does not match domain size")
        for x, y in zip(self.dom.elements, table):
            if y not in self.cod:
                raise FinSetError(f"image {y!r} of {x!r} lies outside the codomain")

    @classmethod
    def from_function(cls, dom: FinSet, cod: FinSet, fn: Callable[[Label], Label]) -> "FinMap":
        return cls(dom, cod, tuple(fn(x) for x in dom.elements))

    @classmethod
    def from_dict(cls, dom: FinSet, cod: FinSet, table: Mapping) -> "FinMap":
        missing = [x for x in dom.elements if x not in table]
        if missing:
            raise FinSetError(f"table undefined at {missing[0]!r}")
        return cls(dom, cod, tuple(table[x] for x in dom.elements))

    @classmethod
    def identity(cls, s: FinSet) -> "FinMap":
        return cls(s, s, s.elements)

    @classmethod
    def constant(cls, dom: FinSet, cod: FinSet, y: Label) -> "FinMap":
        return cls(dom, cod, (y,) * len(dom))

    @classmethod
    def to_terminal(cls, dom: FinSet) -> "FinMap":
        return cls.constant(dom, TERMINAL, ())

    @classmethod
    def inclusion(cls, sub: FinSet, whole: FinSet) -> "FinMap":
        return cls(sub, whole, sub.elements)

    @cached_property
    def _lookup(self) -> dict:
        return dict(zip(self.dom.elements, self.table))

    def __call__(self, x: Label) -> Label:
        try:
            return self._lookup[x]
        except KeyError:
            raise FinSetError(f"{x!r} is not in the domain") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FinMap):
            return NotImplemented
        return self.dom == other.dom and self.cod == other.cod and self.table == other.table

    def __hash__(self) -> int:
        return hash((self.dom, self.cod, self.table))

    def __repr__(self) -> str:
        return f"FinMap({len(self.dom)} -> {len(self.cod)})"

    def items(self) -> Iterator[tuple]:
        return zip(self.dom.elements, self.table)

    def preimage(self, y: Label) -> tuple:
        return self.fibers.get(y, ())

    @cached_property
    def fibers(self) -> dict:
        out: dict = {}
        for x, y in zip(self.dom.elements, self.table):
            out.setdefault(y, []).append(x)
        return {y: tuple(xs) for y, xs in out.items()}

    def is_injective(self) -> bool:
        return len(set(self.table)) == len(self.table)

    def is_surjective(self) -> bool:
        return len(set(self.table)) == len(self.cod)

    def is_bijective(self) -> bool:
        return self.is_injective() and self.is_surjective()

    def inverse(self) -> "FinMap":
        if not self.is_bijective():
            raise FinSetError("map is not invertible")
        back = {y: x for x, y in self.items()}
        return FinMap.from_dict(self.cod, self.dom, back)

    def restrict(self, sub: FinSet) -> "FinMap":
        return FinMap(sub, self.cod, tuple(self(x) for x in sub.elements))

    def corestrict(self, sub: FinSet) -> "FinMap":
        return FinMap(self.dom, sub, self.table)

    def image(self) -> FinSet:
        hit = set(self.table)
        return self.cod.subset(lambda y: y in hit)


def compose(g: FinMap, f: FinMap) -> FinMap:
    """``g ∘ f``."""
    if f.cod != g.dom:
        raise CompositionError("codomain of the first map is not the domain of the second")
    return FinMap(f.dom, g.cod, tuple(g(y) for y in f.table))


def compose_all(*maps: FinMap) -> FinMap:
    """``compose_all(h, g, f) == h ∘ g ∘ f``."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = compose(m, out)
    return out


def product(a: FinSet, b: FinSet) -> FinSet:
    return FinSet(tuple(itertools.product(a.elements, b.elements)))


def pair_map(f: FinMap, g: FinMap, cod: FinSet | None = None) -> FinMap:
    """``⟨f, g⟩ : X -> A × B`` (or into the subset ``cod`` when given)."""
    if f.dom != g.dom:
        raise FinSetError("pairing needs a common domain")
    target = cod if cod is not None else product(f.cod, g.cod)
    return FinMap(f.dom, target, tuple(zip(f.table, g.table)))


def coproduct(*sets: FinSet) -> FinSet:
    return FinSet(tuple((i, x) for i, s in enumerate(sets) for x in s.elements))


# -- pullbacks ---------------------------------------------------------------


def pullback(f: FinMap, g: FinMap) -> tuple[FinSet, FinMap, FinMap]:
    """Canonical pullback of the cospan ``A --f--> C <--g-- B``."""
    if f.cod != g.cod:
        raise FinSetError("pullback of maps with different codomains")
    fibers_g = g.fibers
    elements = tuple((a, b) for a, c in f.items() for b in fibers_g.get(c, ()))
    P = FinSet(elements)
    p1 = FinMap(P, f.dom, tuple(a for a, _ in elements))
    p2 = FinMap(P, g.dom, tuple(b for _, b in elements))
    return P, p1, p2


@dataclass(frozen=True)
class Square:
    """
    ::

        TL --top--> TR
        |           |
       left       right
        v           v
        BL -bottom-> BR
    """

    top: FinMap
    bottom: FinMap
    left: FinMap
    right: FinMap

    def __post_init__(self):
        if self.top.dom != self.left.dom:
            raise FinSetError("top and left must share their domain")
        if self.top.cod != self.right.dom:
            raise FinSetError("top must land in the domain of right")
        if self.left.cod != self.bottom.dom:
            raise FinSetError("left must land in the domain of bottom")
        if self.bottom.cod != self.right.cod:
            raise FinSetError("bottom and right must share their codomain")

    def commutes(self) -> bool:
        return self.first_noncommuting() is None

    def first_noncommuting(self) -> Label | None:
        for x in self.top.dom.elements:
            if self.right(self.top(x)) != self.bottom(self.left(x)):
                return (x,)
        return None


@dataclass(frozen=True)
class PullbackReport:
    """Outcome of a fiberwise pullback test.

    ``status`` is one of ``"pullback"``, ``"not-cartesian"`` or
    ``"not-commuting"``.  ``witness`` is the first bottom-left element whose
    induced fiber map is not a bijection (or the first top-left element
    breaking commutativity).
    """

    status: str
    fibers_checked: int = 0
    elements_checked: int = 0
    witness: Label = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "pullback"


def check_pullback(sq: Square) -> PullbackReport:
    """Walk the bottom-left elements in order; the first bad fiber decides the status."""
    left_fibers = sq.left.fibers
    right_fibers = sq.right.fibers
    n_fibers = 0
    n_elems = 0
    for x in sq.bottom.dom.elements:
        n_fibers += 1
        src = left_fibers.get(x, ())
        y = sq.bottom(x)
        n_elems += len(src)
        images = [sq.top(a) for a in src]
        for a, img in zip(src, images):
            if sq.right(img) != y:
                return PullbackReport(
                    "not-commuting", n_fibers, n_elems, witness=a,
                    detail=f"composites differ at {a!r}",
                )
        tgt = right_fibers.get(y, ())
        if len(src) != len(tgt) or len(set(images)) != len(images):
            return PullbackReport(
                "not-cartesian",
                n_fibers,
                n_elems,
                witness=x,
                detail=f"fiber over {x!r} has {len(src)} element(s), target fiber has {len(tgt)}",
            )
    return PullbackReport("pullback", n_fibers, n_elems)


def is_pullback(sq: Square) -> bool:
    """Fiberwise pullback test; raises :class:`NotCommutingError` if the square does not commute."""
    bad = sq.first_noncommuting()
    if bad is not None:
        raise NotCommutingError("square does not commute", bad[0])
    return check_pullback(sq).ok


def pullback_square(f: FinMap, g: FinMap) -> Square:
    P, p1, p2 = pullback(f, g)
    return Square(top=p2, bottom=f, left=p1, right=g)


# -- families (objects of slices) --------------------------------------------


@dataclass(frozen=True)
class Family:
    """A map ``proj : total -> base`` read as the family of its fibers."""

    proj: FinMap

    @classmethod
    def from_fibers(cls, base: FinSet, fibers: Mapping[Label, Sequence[Label]]) -> "Family":
        total = FinSet(tuple(e for b in base.elements for e in fibers.get(b, ())))
        table = tuple(b for b in base.elements for _ in fibers.get(b, ()))
        return cls(FinMap(total, base, table))

    @classmethod
    def canonical(cls, sizes: Sequence[int]) -> "Family":
        """Base ``0..n-1`` with fiber ``(b, 0), ..., (b, k_b - 1)`` over ``b``."""
        base = FinSet.range(len(sizes))
        return cls.from_fibers(base, {b: [(b, i) for i in range(k)] for b, k in enumerate(sizes)})

    @property
    def total(self) -> FinSet:
        return self.proj.dom

    @property
    def base(self) -> FinSet:
        return self.proj.cod

    def fiber(self, b: Label) -> tuple:
        if b not in self.base:
            raise FinSetError(f"{b!r} is not in the base")
        return self.proj.fibers.get(b, ())

    def fiber_sizes(self) -> tuple:
        return tuple(len(self.fiber(b)) for b in self.base.elements)

    @cached_property
    def _positions(self) -> dict:
        return {e: i for fib in self.proj.fibers.values() for i, e in enumerate(fib)}

    def position(self, e: Label) -> int:
        """Index of ``e`` inside its own fiber."""
        return self._positions[e]

    def restrict_base(self, sub: FinSet) -> "Family":
        fibers = {b: self.fiber(b) for b in sub.elements}
        return Family.from_fibers(sub, fibers)


def base_change(f: FinMap, fam: Family) -> Family:
    """Pull ``fam`` (over ``Y``) back along ``f : X -> Y``; labels are ``(x, e)``."""
    if f.cod != fam.base:
        raise FinSetError("base change along a map into a different base")
    _, p1, _ = pullback(f, fam.proj)
    return Family(p1)


def dependent_sum(f: FinMap, fam: Family) -> Family:
    """Σ_f: same total, projected further along ``f``."""
    if f.dom != fam.base:
        raise FinSetError("dependent sum along a map out of a different base")
    return Family(compose(f, fam.proj))


def _sections(fam: Family, points: Sequence[Label]) -> Iterator[tuple]:
    return itertools.product(*(fam.fiber(x) for x in points))


def pushforward(f: FinMap, fam: Family) -> Family:
    """Π_f: the fiber over ``y`` is the set of sections of ``fam`` over ``f⁻¹(y)``.

    Labels are ``(y, s)`` where ``s`` lists one element of each fiber over the
    points of ``f⁻¹(y)``, in domain order.
    """
    if f.dom != fam.base:
        raise FinSetError("pushforward along a map out of a different base")
    fibers = {y: [(y, s) for s in _sections(fam, f.preimage(y))] for y in f.cod.elements}
    return Family.from_fibers(f.cod, fibers)


def evaluate_section(f: FinMap, x: Label, section_label: tuple) -> Label:
    """Counit of Π_f: evaluate the section ``(f(x), s)`` at the point ``x``."""
    y, s = section_label
    if f(x) != y:
        raise FinSetError(f"{x!r} does not lie over {y!r}")
    return s[f.preimage(y).index(x)]


def slice_exponential(f1: Family, f2: Family) -> Family:
    """Fiber over ``x`` = all functions ``f1_x -> f2_x``; labels ``(x, images)``."""
    if f1.base != f2.base:
        raise FinSetError("slice exponential of families over different bases")
    fibers = {
        x: [(x, imgs) for imgs in itertools.product(f2.fiber(x), repeat=len(f1.fiber(x)))]
        for x in f1.base.elements
    }
    return Family.from_fibers(f1.base, fibers)


def exponential_evaluation(f1: Family, f2: Family, exp: Family | None = None) -> tuple[Family, FinMap]:
    """The evaluation map ``f1 ×_X [f1, f2] -> f2``.

    Returns the family ``f1 ×_X [f1, f2]`` (labels ``(a, h)``) over ``[f1, f2]``
    together with evaluation into ``f2.total``.
    """
    exp = exp if exp is not None else slice_exponential(f1, f2)
    P, p1, p2 = pullback(f1.proj, exp.proj)
    table = tuple(h[1][f1.position(a)] for a, h in P.elements)
    return Family(p2), FinMap(P, f2.total, table)


def exponential_transpose(z: Family, f1: Family, f2: Family, g: FinMap) -> FinMap:
    """Transpose ``g : z ×_X f1 -> f2`` (over X) to ``z -> [f1, f2]``.

    ``g`` must be defined on the canonical pullback ``pullback(z.proj, f1.proj)``.
    """
    exp = slice_exponential(f1, f2)
    table = []
    for w in z.total.elements:
        x = z.proj(w)
        table.append((x, tuple(g((w, a)) for a in f1.fiber(x))))
    return FinMap(z.total, exp.total, tuple(table))


def fiberwise_iso(fam1: Family, fam2: Family) -> FinMap | None:
    """The order-preserving fiberwise bijection ``fam1 -> fam2``, or None if fiber sizes differ."""
    if fam1.base != fam2.base:
        raise FinSetError("families over different bases")
    table = {}
    for b in fam1.base.elements:
        s, t = fam1.fiber(b), fam2.fiber(b)
        if len(s) != len(t):
            return None
        table.update(zip(s, t))
    return FinMap.from_dict(fam1.total, fam2.total, table)


# -- JSON ----------------------------------------------------------------------


def encode_label(x: Label) -> Any:
    if isinstance(x, tuple):
        return [encode_label(y) for y in x]
    if isinstance(x, frozenset):
        raise FinSetError("frozenset labels are not serializable; use sorted tuples")
    return x


def decode_label(x: Any) -> Label:
    if isinstance(x, list):
        return tuple(decode_label(y) for y in x)
    return x


def _key(x: Label) -> str:
    return x if isinstance(x, str) else json.dumps(encode_label(x), separators=(",", ":"))


def finset_to_json(s: FinSet) -> dict:
    return {"elements": [encode_label(x) for x in s.elements]}


def finset_from_json(obj: Mapping) -> FinSet:
    return FinSet(tuple(decode_label(x) for x in obj["elements"]))


def finmap_to_json(f: FinMap) -> dict:
    keys = [_key(x) for x in f.dom.elements]
    if len(set(keys)) != len(keys):
        raise FinSetError("domain labels collide once rendered as JSON keys")
    return {
        "dom": finset_to_json(f.dom),
        "cod": finset_to_json(f.cod),
        "table": {k: encode_label(y) for k, y in zip(keys, f.table)},
    }


def finmap_from_json(obj: Mapping) -> FinMap:
    dom = finset_from_json(obj["dom"])
    cod = finset_from_json(obj["cod"])
    raw = obj["table"]
    by_key = {}
    for x in dom.elements:
        k = _key(x)
        if k in by_key:
            raise FinSetError("domain labels collide once rendered as JSON keys")
        by_key[k] = x
    unknown = set(raw) - set(by_key)
    if unknown:
        raise FinSetError(f"table mentions unknown domain label {sorted(unknown)[0]!r}")
    return FinMap.from_dict(dom, cod, {by_key[k]: decode_label(v) for k, v in raw.items()})


def family_to_json(fam: Family) -> dict:
    return {"proj": finmap_to_json(fam.proj)}


def family_from_json(obj: Mapping) -> Family:
    return Family(finmap_from_json(obj["proj"]))


def all_maps(dom: FinSet, cod: FinSet) -> Iterator[FinMap]:
    """Every map ``dom -> cod`` in lexicographic order of tables."""
    for table in itertools.product(cod.elements, repeat=len(dom)):
        yield FinMap(dom, cod, table)


def map_from_pairs(dom: FinSet, cod: FinSet, pairs: Iterable[tuple]) -> FinMap:
    return FinMap.from_dict(dom, cod, dict(pairs))
