from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, strategies as st

from algtt.finset import FinMap, FinSet, pullback
from algtt.mlalg import comprehend, nat_algebra, verify_ml_algebra
from algtt.presheaf import (
    CategoryError,
    IndexCategory,
    NotRepresentableError,
    PNat,
    Presheaf,
    all_presheaves,
    arrow_category,
    category_from_json,
    category_to_json,
    check_partial_map_bijection,
    check_subobject_classification,
    clan_model,
    classify_subobject,
    composable_pair,
    compose_presheaf_signatures,
    context_extension,
    diagonal_classifier,
    discrete_pnat,
    elements,
    elements_nerve_bijection,
    hom_nat,
    hs_omega_iso,
    hs_universe,
    identity_nat,
    is_representable,
    maximal_sieve,
    nerve,
    omega,
    omega_algebra,
    partial_map_classifier,
    presheaf_from_json,
    presheaf_pullback,
    presheaf_to_json,
    subobjects,
    substitution_is_pullback,
    terminal_category,
    terminal_presheaf,
    yoneda,
)

T, A, P = terminal_category(), arrow_category(), composable_pair()


def constant(C, n):
    return Presheaf.from_function(C, {c: range(n) for c in C.objects}, lambda f, x: x)


def brute_sieves(C, c):
    """Subsets of arrows into c closed under precomposition, found by trying every subset."""
    into = [f for f in C.arrow_names if C.dst(f) == c]
    out = []
    for r in range(len(into) + 1):
        for S in itertools.combinations(into, r):
            if all(C.then(f, g) in S for f in S for g in C.arrow_names if C.dst(g) == C.src(f)):
                out.append(frozenset(S))
    return out


def brute_hom(X, Y):
    """Natural maps X -> Y by filtering every family of functions."""
    C = X.C
    spaces = [list(itertools.product(Y.at[c].elements, repeat=len(X.at[c]))) for c in C.objects]
    count = 0
    for tables in itertools.product(*spaces):
        comp = dict(zip(C.objects, tables))
        idx = {c: {x: k for k, x in enumerate(X.at[c].elements)} for c in C.objects}
        ok = all(
            comp[C.src(f)][idx[C.src(f)][X.act(f, x)]] == Y.act(f, comp[C.dst(f)][idx[C.dst(f)][x]])
            for f in C.arrow_names
            for x in X.at[C.dst(f)].elements
        )
        count += ok
    return count


@st.composite
def arrow_presheaves(draw, max_size=3):
    n0, n1 = draw(st.integers(0, max_size)), draw(st.integers(0, max_size))
    if n1 and not n0:
        n0 = 1
    table = tuple(draw(st.integers(0, n0 - 1)) for _ in range(n1))
    return Presheaf.from_function(A, {0: range(n0), 1: range(n1)}, lambda f, x: table[x] if f == "u" else x)


class TestCategories:
    def test_composites_checked(self):
        with pytest.raises(CategoryError):
            IndexCategory.build([0, 1, 2], [("f", 0, 1), ("g", 1, 2)])

    def test_json_round_trip(self):
        data = json.loads(json.dumps(category_to_json(P)))
        Q = category_from_json(data)
        assert Q.objects == P.objects and set(Q.arrow_names) == set(P.arrow_names)
        assert Q.then("g", "f") == "gf"

    def test_presheaf_json_round_trip(self):
        X = Presheaf.from_function(A, {0: range(2), 1: range(3)}, lambda f, x: min(x, 1) if f == "u" else x)
        Y = presheaf_from_json(json.loads(json.dumps(presheaf_to_json(X))))
        assert Y.sizes() == X.sizes() and Y.restrict["u"].table == X.restrict["u"].table

    def test_functoriality_enforced(self):
        with pytest.raises(CategoryError):
            Presheaf.from_function(P, {0: range(2), 1: range(2), 2: range(2)}, lambda f, x: {"f": 1 - x, "g": 1 - x, "gf": 0}.get(f, x))


class TestYonedaAndElements:
    def test_yoneda_on_terminal(self):
        assert yoneda(T, "*").sizes() == (1,)

    def test_elements_of_terminal_presheaf(self):
        E = elements(terminal_presheaf(P))
        assert len(E.objects) == len(P.objects)
        assert len(E.arrow_names) == len(P.arrow_names)

    @given(arrow_presheaves())
    def test_elements_count(self, X):
        assert len(elements(X).objects) == sum(X.sizes())

    def test_unknown_object(self):
        with pytest.raises(CategoryError):
            yoneda(A, 7)


class TestRepresentability:
    def test_identity_is_representable(self):
        rep = is_representable(identity_nat(constant(A, 2)))
        assert rep.ok
        assert all(A.is_identity(f) for _, (f, _) in rep.choices.values())

    def test_clan_model_is_representable(self):
        for display in ([A.identity(0)], ["u"], list(A.arrow_names), []):
            p = clan_model(A, display)
            assert is_representable(p).ok
        p = clan_model(A, list(A.arrow_names))
        expected = tuple(sum(len(A.hom(c, A.dst(d))) for d in A.arrow_names) for c in A.objects)
        assert p.tgt.sizes() == expected

    def test_empty_display(self):
        p = clan_model(P, [])
        assert p.src.sizes() == p.tgt.sizes() == (0, 0, 0)

    def test_nat_display_map_over_terminal_category(self):
        alg = nat_algebra(4)
        rep = is_representable(discrete_pnat(T, alg.family().proj))
        assert not rep.ok and rep.failure == ("*", 0)
        assert is_representable(discrete_pnat(T, alg.family([1]).proj)).ok

    def test_failure_is_reported(self):
        X = constant(A, 1)
        Y = constant(A, 2)
        p = PNat.from_function(Y, X, lambda c, y: 0)
        rep = is_representable(p)
        assert not rep.ok and rep.failure == (A.objects[0], 0)

    def test_context_extension_unit_and_substitution(self):
        p = clan_model(A, list(A.arrow_names))
        ext = context_extension(p, 1, ("id_1", "id_1"))
        assert ext.obj == 1 and A.is_identity(ext.pi)
        for A_ty in p.tgt.at[1].elements:
            for sigma in A.into(1):
                assert substitution_is_pullback(p, 1, A_ty, sigma)

    def test_nat_model_over_terminal(self):
        alg = nat_algebra(8)
        U = alg.U
        t = alg.family().proj
        p = discrete_pnat(T, t)
        ext = context_extension(p, "*", 1)
        cl = comprehend(alg, FinMap(FinSet.range(1), U, (1,)))
        assert (ext.q,) == tuple(cl.alpha_dot.table)
        with pytest.raises(NotRepresentableError):
            context_extension(p, "*", 2)


class TestOmega:
    @pytest.mark.parametrize("C", [T, A, P], ids=["terminal", "arrow", "pair"])
    def test_sieves_match_brute_force(self, C):
        om = omega(C)
        for c in C.objects:
            assert {frozenset(S) for S in om.presheaf.at[c]} == set(brute_sieves(C, c))

    def test_sizes(self):
        assert omega(T).presheaf.sizes() == (2,)
        om = omega(A)
        assert len(om.presheaf.at[1]) == 3 and len(om.presheaf.at[0]) == 2

    def test_top_subobject_is_maximal(self):
        X = constant(A, 2)
        chi = classify_subobject(X, tuple(frozenset(X.at[c].elements) for c in A.objects))
        assert all(chi(c, x) == maximal_sieve(A, c) for c, x in X.elements_list())

    @given(arrow_presheaves(2))
    def test_sub_hom_bijection(self, X):
        res = check_subobject_classification(X)
        assert res.bijective
        assert res.subobjects == brute_hom(X, omega(A).presheaf)

    def test_not_a_subobject(self):
        X = Presheaf.from_function(A, {0: range(1), 1: range(1)}, lambda f, x: 0)
        with pytest.raises(CategoryError):
            classify_subobject(X, (frozenset(), frozenset({0})))

    def test_hom_nat_agrees_with_brute_force(self):
        for X in all_presheaves(A, 2):
            for Y in itertools.islice(all_presheaves(A, 2), 0, None, 7):
                assert sum(1 for _ in hom_nat(X, Y)) == brute_hom(X, Y)


class TestPartialMaps:
    def test_terminal_adds_one_point(self):
        for n in range(4):
            assert len(partial_map_classifier(constant(T, n)).presheaf.at["*"]) == n + 1

    def test_empty_X(self):
        pmc = partial_map_classifier(constant(A, 0))
        # only the empty sieve carries a section with empty domain
        assert pmc.presheaf.sizes() == (1, 1)
        assert all(b == () for c in A.objects for b, _ in pmc.presheaf.at[c])

    def test_bijection_over_arrow_category(self):
        small = list(all_presheaves(A, 2))
        for X in small[::3]:
            pmc = partial_map_classifier(X)
            for Y in small[::4]:
                assert check_partial_map_bijection(Y, X, pmc)


class TestOmegaAlgebra:
    def test_terminal_classifiers(self):
        alg = omega_algebra(T)
        top, bot = ("id_*",), ()
        Sigma = dict(alg.Sigma.components["*"].items())
        Pi = dict(alg.Pi.components["*"].items())
        assert Sigma[(top, (top,))] == top and Sigma[(top, (bot,))] == bot and Sigma[(bot, ())] == bot
        assert Pi[(top, (top,))] == top and Pi[(top, (bot,))] == bot and Pi[(bot, ())] == top

    @pytest.mark.parametrize("C", [T, A, P], ids=["terminal", "arrow", "pair"])
    def test_squares_pass(self, C):
        alg = omega_algebra(C)
        assert verify_ml_algebra(alg).ok
        assert compose_presheaf_signatures(alg.t, alg.t).signature.is_mono()

    def test_eq_is_biconditional(self):
        om = omega(T)
        chi = diagonal_classifier(om.presheaf, om)
        top = maximal_sieve(T, "*")
        for (p, q), v in chi.components["*"].items():
            assert (v == top) == (p == q)
        from algtt.mlalg import _summarize

        assert _summarize("eq", omega_algebra(A).eq_squares()).status == "pass"


class TestNerveAndUniverse:
    @pytest.mark.parametrize("C", [T, A, P], ids=["terminal", "arrow", "pair"])
    def test_kappa_two_is_omega(self, C):
        hs = hs_universe(C, 2)
        iso = hs_omega_iso(hs)
        assert iso.is_iso()
        assert hs.V.sizes() == omega(C).presheaf.sizes()

    def test_arrow_sizes(self):
        hs = hs_universe(A, 2)
        assert (len(hs.V.at[1]), len(hs.V.at[0])) == (3, 2)

    def test_terminal_kappa_two(self):
        assert hs_universe(T, 2).V.sizes() == (2,)

    def test_terminal_kappa_three_counts_cardinals(self):
        hs = hs_universe(T, 3)
        assert hs.V.sizes() == (3,)
        assert sorted(F.objects[0] for F in hs.V.at["*"]) == [0, 1, 2]

    def test_kappa_out_of_range(self):
        with pytest.raises(ValueError):
            hs_universe(T, 4)

    def test_kappa_three_marks_sigma_pi_not_applicable(self):
        rep = verify_ml_algebra(hs_universe(A, 3))
        assert rep.ok
        assert rep["unit"].status == "pass"
        assert rep["sigma"].status == rep["pi"].status == "not-applicable"

    def test_kappa_two_squares(self):
        assert verify_ml_algebra(hs_universe(A, 2)).ok

    def test_nerve_adjunction(self):
        for X in list(all_presheaves(A, 1)) + [constant(A, 2)]:
            assert elements_nerve_bijection(X, A)

    def test_nerve_of_terminal_category(self):
        assert nerve(A, T).sizes() == (1, 1)


@given(arrow_presheaves(2), arrow_presheaves(2), arrow_presheaves(2))
def test_presheaf_pullback_is_pointwise(X, Y, Z):
    fs = list(itertools.islice(hom_nat(X, Z), 2))
    gs = list(itertools.islice(hom_nat(Y, Z), 2))
    for f in fs:
        for g in gs:
            Pb, _, _ = presheaf_pullback(f, g)
            for c in A.objects:
                assert Pb.at[c] == pullback(f.components[c], g.components[c])[0]
