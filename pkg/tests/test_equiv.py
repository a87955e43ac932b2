from __future__ import annotations

import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st
from sympy.combinatorics import Permutation

from algtt.equiv import (
    LAWS,
    BoundaryError,
    NestedFamily,
    NotAnEquivalenceError,
    OneCell,
    TwoCell,
    auto_equivalences,
    build_equiv,
    canonical_classification,
    check_classification,
    comparison_lift,
    hom_category,
    identity_two_cell,
    is_equiv_count,
    lift_equivalence,
    make_two_cell,
    pullback_universal,
    random_nested_family,
    reclassify_equivalence,
    relabel,
    typeiso_witness,
    verify_two_cell,
    vertical_compose,
    whisker_left,
    whisker_right,
)
from algtt.finset import FinMap, FinSet
from algtt.mlalg import MissingStructureError, nat_algebra

ALG = nat_algebra(64)
EC = build_equiv(ALG, 5)


def perm_of(z) -> Permutation:
    (m, _), perm = z
    return Permutation([i for _, i in perm], size=m)


def classify(values):
    return canonical_classification(ALG, FinMap(FinSet.range(len(values)), ALG.U, tuple(values)))


class TestClassifier:
    def test_fiber_sizes(self):
        sizes = EC.fiber_sizes()
        for m in range(6):
            for n in range(6):
                assert sizes[(m, n)] == (math.factorial(n) if m == n else 0)

    def test_examples(self):
        assert len(EC.fiber(3, 3)) == 6
        assert len(EC.fiber(2, 3)) == 0
        assert len(EC.fiber(0, 0)) == 1

    def test_fibers_are_all_bijections(self):
        for m in range(5):
            brute = {p for p in itertools.permutations(ALG.fiber(m))}
            assert {perm for _, perm in EC.fiber(m, m)} == brute

    def test_is_equiv_count_matches(self):
        for m, n in [(2, 2), (3, 3), (2, 1)]:
            for images in itertools.product(ALG.fiber(n), repeat=m):
                expected = 1 if len(set(images)) == m == n else 0
                assert is_equiv_count(ALG, m, n, images) == expected

    def test_universal_equivalence_is_the_evaluation(self):
        for (z, e), img in EC.universal.items():
            assert img[0] == z and EC.apply(z, e[1]) == img[1][1]

    def test_needs_eq(self):
        from dataclasses import replace

        with pytest.raises(MissingStructureError):
            build_equiv(replace(ALG, eq=None), 2)


class TestGroupoid:
    def test_unit_and_involution(self):
        for n in range(4):
            for z in EC.fiber(n, n):
                assert EC.trans(EC.refl(n), z) == z == EC.trans(z, EC.refl(n))
                assert EC.sym(EC.sym(z)) == z
                assert EC.trans(z, EC.sym(z)) == EC.refl(n)

    def test_s3_multiplication_table(self):
        elems = EC.fiber(3, 3)
        for a in elems:
            for b in elems:
                assert perm_of(EC.trans(a, b)) == perm_of(a) * perm_of(b)

    def test_associativity_up_to_four(self):
        for n in range(5):
            elems = EC.fiber(n, n)
            sample = elems if n < 4 else elems[::3]
            for a, b, c in itertools.product(sample, repeat=3):
                assert EC.trans(EC.trans(a, b), c) == EC.trans(a, EC.trans(b, c))

    def test_boundary_mismatch(self):
        with pytest.raises(BoundaryError):
            EC.trans(EC.refl(2), EC.refl(3))

    def test_maps(self):
        assert EC.trans_map().is_surjective()
        assert EC.sym_map().is_bijective()
        assert EC.refl_map().is_injective()


class TestLifts:
    def test_identity_lifts_to_refl(self):
        A = classify([2, 3])
        lift = lift_equivalence(EC, A, A, FinMap.identity(A.family.total))
        assert lift.table == tuple(EC.refl(u) for u in (2, 3))

    def test_three_cycle(self):
        A = classify([3])
        pts = A.family.fiber(0)
        cycle = FinMap.from_dict(A.family.total, A.family.total, dict(zip(pts, pts[1:] + pts[:1])))
        lift = lift_equivalence(EC, A, A, cycle)
        assert perm_of(lift(0)) == Permutation([1, 2, 0])

    def test_round_trip_is_identity(self):
        A, B = classify([2, 3, 0]), classify([2, 3, 0])
        for e in auto_equivalences(A):
            e_AB = FinMap(A.family.total, B.family.total, e.table)
            assert pullback_universal(EC, lift_equivalence(EC, A, B, e_AB), A, B) == e_AB

    def test_rejects_non_equivalence(self):
        A = classify([2])
        pts = A.family.fiber(0)
        collapse = FinMap(A.family.total, A.family.total, (pts[0], pts[0]))
        with pytest.raises(NotAnEquivalenceError) as info:
            lift_equivalence(EC, A, A, collapse)
        assert info.value.witness == 0

    def test_reclassify_keeps_the_map(self):
        A = classify([3])
        swap = {(3, 0): (3, 1), (3, 1): (3, 0)}
        cyc = {(3, 0): (3, 1), (3, 1): (3, 2), (3, 2): (3, 0)}
        A2, B2 = relabel(ALG, A, {0: swap}), relabel(ALG, A, {0: cyc})
        assert check_classification(ALG, A2) and check_classification(ALG, B2)
        for e in auto_equivalences(A):
            lift = lift_equivalence(EC, A, A, e)
            same = reclassify_equivalence(EC, lift, A, A, A, A)
            assert same == lift
            moved = reclassify_equivalence(EC, lift, A, A, A2, B2)
            assert pullback_universal(EC, moved, A2, B2) == e
            # the three factors in order: ℓ(α', α), then ẽ, then ℓ(β, β')
            factors = [comparison_lift(EC, A2, A)(0), lift(0), comparison_lift(EC, A, B2)(0)]
            assert perm_of(moved(0)) == perm_of(factors[0]) * perm_of(factors[1]) * perm_of(factors[2])


class TestTwoCells:
    def setup_method(self):
        self.A = classify([2])
        self.B = classify([2, 5, 2])
        self.h1 = OneCell(FinMap(FinSet.range(1), FinSet.range(3), (0,)), self.A, self.B)
        self.h2 = OneCell(FinMap(FinSet.range(1), FinSet.range(3), (2,)), self.A, self.B)

    def test_identity_two_cell(self):
        assert verify_two_cell(EC, identity_two_cell(EC, self.h1)).ok

    def test_swap_is_valid(self):
        pts = self.A.family.fiber(0)
        swap = FinMap.from_dict(self.A.family.total, self.A.family.total, {pts[0]: pts[1], pts[1]: pts[0]})
        for h1, h2 in itertools.product([self.h1, self.h2], repeat=2):
            assert verify_two_cell(EC, make_two_cell(EC, h1, h2, swap)).ok

    def test_phi_off_the_fiber_is_rejected(self):
        A = classify([1, 1])
        Y = classify([1])
        h = OneCell(FinMap(FinSet.range(2), FinSet.range(1), (0, 0)), A, Y)
        a0, a1 = A.family.total.elements
        bad = FinMap(A.family.total, A.family.total, (a1, a0))
        good = identity_two_cell(EC, h)
        rep = verify_two_cell(EC, TwoCell(h, h, bad, good.lift))
        assert not rep.ok and rep.check == "φ over X" and rep.witness == a0

    def test_hom_category_is_s3(self):
        A = classify([3])
        h = OneCell(FinMap.identity(FinSet.range(1)), A, A)
        cells = hom_category(EC, h, h)
        assert len(cells) == 6
        assert all(verify_two_cell(EC, c).ok for c in cells)
        perms = {c.phi.table: c for c in cells}
        for t1, t2 in itertools.product(cells, repeat=2):
            comp = vertical_compose(EC, t1, t2)
            assert comp.phi.table in perms
            assert perm_of(comp.lift(0)[1]) == perm_of(t1.lift(0)[1]) * perm_of(t2.lift(0)[1])
        ident = identity_two_cell(EC, h)
        for t in cells:
            assert vertical_compose(EC, ident, t).phi == t.phi == vertical_compose(EC, t, ident).phi

    def test_vertical_composition_associative(self):
        A = classify([3, 2])
        h = OneCell(FinMap.identity(FinSet.range(2)), A, A)
        cells = hom_category(EC, h, h)
        for a, b, c in itertools.product(cells[::2], repeat=3):
            lhs = vertical_compose(EC, vertical_compose(EC, a, b), c)
            rhs = vertical_compose(EC, a, vertical_compose(EC, b, c))
            assert lhs.phi == rhs.phi

    def test_whiskering_stays_valid(self):
        pts = self.A.family.fiber(0)
        swap = FinMap.from_dict(self.A.family.total, self.A.family.total, {pts[0]: pts[1], pts[1]: pts[0]})
        tc = make_two_cell(EC, self.h1, self.h2, swap)
        Xp = classify([2, 2])
        k = OneCell(FinMap(FinSet.range(2), FinSet.range(1), (0, 0)), Xp, self.A)
        assert verify_two_cell(EC, whisker_left(EC, tc, k)).ok
        Z = classify([2, 2])
        g = OneCell(FinMap(FinSet.range(3), FinSet.range(2), (1, 0, 1)), self.B, Z)
        assert verify_two_cell(EC, whisker_right(EC, tc, g)).ok


class TestTypeIsos:
    big = nat_algebra(4097)

    def test_sigma_assoc(self):
        w = typeiso_witness("sigma-assoc", self.big, NestedFamily(2, (1, 2), ((3,), (3, 3))))
        assert len(w.lhs) == len(w.rhs) == 9 and w.ok

    def test_sigma_unit_right(self):
        w = typeiso_witness("sigma-unit-r", self.big, NestedFamily(5))
        assert len(w.lhs) == 5 and w.ok

    def test_pi_assoc(self):
        w = typeiso_witness("pi-assoc", self.big, NestedFamily(2, (2, 1), ((2, 2), (2,))))
        assert len(w.lhs) == len(w.rhs) == 2 ** 3 and w.ok

    def test_json_permutation(self):
        w = typeiso_witness("sigma-unit-l", self.big, NestedFamily(3))
        out = w.to_json()
        assert sorted(out["permutation"]) == list(range(len(w.lhs)))

    def test_malformed_nesting(self):
        from algtt.finset import FinSetError

        with pytest.raises(FinSetError):
            typeiso_witness("sigma-assoc", self.big, NestedFamily(2, (1,), ((1,),)))
        with pytest.raises(ValueError):
            typeiso_witness("nope", self.big, NestedFamily(1))

    @given(st.sampled_from(LAWS), st.integers(0, 2 ** 32))
    def test_witnesses_are_invertible(self, law, seed):
        data = random_nested_family(random.Random(seed), law, 3, max_card=4096)
        w = typeiso_witness(law, self.big, data)
        assert w.invertible and w.base_compatible
        inv = w.bijection.inverse()
        assert all(inv(w.bijection(x)) == x for x in w.lhs)
