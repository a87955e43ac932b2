from __future__ import annotations

import itertools
import json
import random

import pytest
from hypothesis import given, strategies as st

from algtt.finset import Family, FinMap, FinSet, FinSetError, Square, all_maps, compose, is_pullback, pullback
from algtt.polynomial import (
    CartMorphism,
    PolyElement,
    PolySignature,
    PolyTranspose,
    composition_iso,
    composition_naturality,
    compose_signatures,
    extension,
    extension_on_map,
    extension_size,
    pipeline_to_canonical,
    random_signature_pairs,
    square_to_nat,
    ump_transpose,
    ump_untranspose,
)

from conftest import fiber_sizes, finmaps


def sig(*sizes):
    return PolySignature.from_sizes(sizes)


def nested_size(p, q, n):
    """|P_p(P_q(X))| from fiber sizes alone."""
    inner = sum(n ** k for k in q.fiber_sizes())
    return sum(inner ** k for k in p.fiber_sizes())


class TestExtension:
    def test_single_fiber_of_two(self):
        assert len(extension(sig(2), FinSet.range(3))) == 9

    def test_lists_of_length_at_most_three(self):
        E = extension(sig(0, 1, 2, 3), FinSet(("x0", "x1")))
        assert len(E) == 1 + 2 + 4 + 8 == 15
        assert {s for _, s in E} == {w for k in range(4) for w in itertools.product(("x0", "x1"), repeat=k)}

    def test_empty_X(self):
        assert len(extension(sig(0, 2), FinSet(()))) == 1

    @given(fiber_sizes(4, 3), st.integers(0, 5))
    def test_closed_form(self, sizes, n):
        s = PolySignature.from_sizes(sizes)
        assert len(extension(s, FinSet.range(n))) == sum(n ** k for k in sizes) == extension_size(s, n)

    @given(fiber_sizes(3, 3), st.integers(0, 3))
    def test_pipeline_agrees(self, sizes, n):
        assert pipeline_to_canonical(PolySignature.from_sizes(sizes), FinSet.range(n)).is_bijective()


class TestFunctoriality:
    def test_identity(self):
        s = sig(0, 2)
        X = FinSet.range(2)
        assert extension_on_map(s, FinMap.identity(X)) == FinMap.identity(extension(s, X))

    def test_constant_makes_constant_sections(self):
        h = FinMap.constant(FinSet.range(3), FinSet.range(2), 1)
        for _, section in extension_on_map(sig(1, 2), h).table:
            assert set(section) <= {1}

    @given(fiber_sizes(3, 2), finmaps(3, 3), st.data())
    def test_composition(self, sizes, f, data):
        s = PolySignature.from_sizes(sizes)
        Z = FinSet.range(data.draw(st.integers(1, 3)))
        g = FinMap(f.cod, Z, tuple(data.draw(st.sampled_from(Z.elements)) for _ in f.cod))
        assert extension_on_map(s, compose(g, f)) == compose(extension_on_map(s, g), extension_on_map(s, f))


class TestTranspose:
    def test_global_element(self):
        s = sig(1, 2)
        X = FinSet.range(3)
        el = PolyElement(1, (2, 0))
        f = FinMap(FinSet.range(1), extension(s, X), (el,))
        tr = ump_transpose(s, X, f)
        assert tr.f1.table == (1,)
        assert tr.f2.table == (2, 0)

    def test_empty_fiber_gives_empty_f2(self):
        s = sig(0)
        X = FinSet.range(2)
        f = FinMap(FinSet.range(3), extension(s, X), (PolyElement(0, ()),) * 3)
        tr = ump_transpose(s, X, f)
        assert len(tr.f2.dom) == 0
        assert ump_untranspose(s, X, tr) == f

    def test_round_trip_on_seeded_maps(self):
        rng = random.Random(11)
        for _ in range(20):
            s = PolySignature.from_sizes([rng.randint(0, 2) for _ in range(rng.randint(1, 3))])
            X = FinSet.range(rng.randint(1, 3))
            cod = extension(s, X)
            Z = FinSet.range(rng.randint(0, 4))
            f = FinMap(Z, cod, tuple(rng.choice(cod.elements) for _ in Z))
            assert ump_untranspose(s, X, ump_transpose(s, X, f)) == f

    def test_rejects_non_canonical_codomain(self):
        s = sig(1)
        f = FinMap(FinSet.range(1), FinSet(("junk",)), ("junk",))
        with pytest.raises(FinSetError):
            ump_transpose(s, FinSet.range(2), f)

    @pytest.mark.parametrize("sizes", [(1,), (0, 2), (2, 1)])
    def test_bijection_between_hom_sets(self, sizes):
        s = PolySignature.from_sizes(sizes)
        X = FinSet.range(2)
        cod = extension(s, X)
        for nz in range(3):
            Z = FinSet.range(nz)
            maps = list(all_maps(Z, cod))
            pairs = set()
            for f in maps:
                tr = ump_transpose(s, X, f)
                pairs.add((tr.f1.table, tr.f2.table))
            # count the pairs (f1, f2) directly
            count = 0
            for f1 in all_maps(Z, s.base):
                P, _, _ = pullback(f1, s.proj)
                count += len(X) ** len(P)
            assert len(pairs) == len(maps) == count


class TestComposition:
    def test_two_by_three(self):
        p, q = sig(2), sig(3)
        pq = compose_signatures(p, q)
        assert len(pq.signature.base) == 1
        assert pq.signature.fiber_sizes() == (6,)
        for n in (1, 2, 3):
            X = FinSet.range(n)
            assert len(extension(pq.signature, X)) == n ** 6 == len(extension(p, extension(q, X)))
            assert composition_iso(p, q, X, pq).is_bijective()

    def test_unit_signature(self):
        q = sig(0, 2, 1)
        pq = compose_signatures(sig(1), q)
        for n in range(4):
            X = FinSet.range(n)
            iso = composition_iso(sig(1), q, X, pq)
            assert iso.is_bijective()
            assert sorted(pq.signature.fiber_sizes()) == sorted(q.fiber_sizes())

    def test_empty_q_base(self):
        p = sig(0, 1, 0, 2)
        pq = compose_signatures(p, sig())
        assert [b for b, _ in pq.signature.base] == [0, 2]
        assert pq.signature.fiber_sizes() == (0, 0)

    def test_json_forms(self):
        s = sig(2, 0)
        assert s.to_json() == {"base": 2, "fibers": [2, 0]}
        assert PolySignature.from_json(json.loads(json.dumps(s.to_json()))).fiber_sizes() == (2, 0)
        with pytest.raises(FinSetError):
            PolySignature.from_json({"base": 3, "fibers": [1]})

    @given(fiber_sizes(3, 2), fiber_sizes(3, 2))
    def test_natural_bijection(self, ps, qs):
        p, q = PolySignature.from_sizes(ps), PolySignature.from_sizes(qs)
        res = composition_naturality(p, q, (0, 1, 2))
        assert res.ok
        assert list(res.extension_sizes) == [nested_size(p, q, n) for n in (0, 1, 2)]

    def test_seeded_pairs_respect_cap(self):
        pairs = random_signature_pairs(random.Random(3), 5, 500)
        assert all(nested_size(p, q, 3) <= 500 for p, q in pairs)


class TestSquareToNat:
    def test_identity_square(self):
        s = sig(1, 2)
        I = FinMap.identity
        m = CartMorphism(Square(I(s.total), I(s.base), s.proj, s.proj))
        X = FinSet.range(2)
        assert square_to_nat(m, X) == FinMap.identity(extension(s, X))

    def test_selecting_a_summand(self):
        g = sig(1, 2)
        h = FinMap(FinSet.range(1), g.base, (1,))
        P, p1, p2 = pullback(h, g.proj)
        m = CartMorphism(Square(p2, h, p1, g.proj))
        X = FinSet.range(2)
        comp = square_to_nat(m, X)
        assert comp.is_injective()
        assert {b for b, _ in comp.table} == {1}
        assert len(comp.dom) == 4

    def test_rejects_non_cartesian(self):
        g = sig(2)
        one = FinSet.range(1)
        sq = Square(FinMap(one, g.total, (g.total.elements[0],)), FinMap.identity(g.base), FinMap(one, g.base, (0,)), g.proj)
        with pytest.raises(FinSetError):
            CartMorphism(sq)

    @given(fiber_sizes(3, 2), st.data())
    def test_naturality_squares_are_pullbacks(self, sizes, data):
        g = PolySignature.from_sizes(sizes or (1,))
        A = FinSet.range(data.draw(st.integers(0, 3)))
        h = FinMap(A, g.base, tuple(data.draw(st.sampled_from(g.base.elements)) for _ in A))
        P, p1, p2 = pullback(h, g.proj)
        m = CartMorphism(Square(p2, h, p1, g.proj))
        X, Y = FinSet.range(2), FinSet.range(3)
        k = FinMap(X, Y, (2, 0))
        f_sig = PolySignature(Family(p1))
        nat = Square(
            top=square_to_nat(m, X),
            bottom=square_to_nat(m, Y),
            left=extension_on_map(f_sig, k),
            right=extension_on_map(g, k),
        )
        assert nat.commutes() and is_pullback(nat)
