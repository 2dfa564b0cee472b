import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dhj.cube import Subspace, enumerate_lines, enumerate_subspaces, lines_within
from dhj.pointset import PointSet
from dhj.search import (BudgetExhausted, SearchBudget, dhj_value, find_dense_subspace, find_line,
                        find_restricted_subspace, find_subspace, gr_partition_search,
                        linefree_of_size, max_linefree, verify_contained)

from fixtures import off_diagonal
from test_pointset import sets


def brute_max_linefree(k, n):
    """Largest line-free subset by trying every subset, largest first."""
    points = range(k ** n)
    lines = [set(L.indices().tolist()) for L in enumerate_lines(k, n)]
    for size in range(k ** n, -1, -1):
        for S in combinations(points, size):
            S = set(S)
            if not any(L <= S for L in lines):
                return size


class TestFindLine:
    def test_examples(self):
        assert str(find_line(PointSet.full(2, 1))) == "a"
        assert find_line(PointSet.from_words(2, 2, ["12", "21"])) is None
        assert str(find_line(PointSet.from_words(2, 2, ["11", "12", "21"]))) == "1a"

    @settings(max_examples=150, deadline=None)
    @given(sets(max_n=4))
    def test_sound_and_complete(self, A):
        ell = find_line(A)
        inside = [L for L in enumerate_lines(A.k, A.n) if verify_contained(A, L)]
        if ell is None:
            assert not inside
        else:
            assert verify_contained(A, ell) and ell == inside[0]


class TestFindSubspace:
    def test_full_cube(self):
        V = find_subspace(PointSet.full(2, 3), 2)
        assert V.dim == 2 and verify_contained(PointSet.full(2, 3), V)

    def test_antichain(self):
        assert find_subspace(PointSet.from_words(2, 2, ["12", "21"]), 1) is None

    def test_top_dimension_needs_full_cube(self):
        assert find_subspace(PointSet.full(3, 2), 2) == Subspace.identity(3, 2)
        assert find_subspace(off_diagonal() | PointSet.from_words(3, 2, ["11", "22"]), 2) is None

    def test_restricted(self):
        assert str(find_restricted_subspace(PointSet.from_words(3, 1, ["1", "2"]), 1)) == "a"
        A = PointSet.full(3, 2) - PointSet.from_words(3, 2, ["33"])
        V = find_restricted_subspace(A, 1)
        # lexicographically first line whose {1,2}-part is in A; "aa" also qualifies
        assert str(V) == "1a"
        assert verify_contained(A, V, 2) and verify_contained(A, Subspace.parse("aa", 3), 2)
        assert find_restricted_subspace(PointSet.empty(3, 2), 1) is None

    def test_dense_subspace(self):
        A = off_diagonal()
        V, d = find_dense_subspace(A, 1, Fraction(2, 3))
        assert d == Fraction(2, 3) and A.density_in(V) == d
        assert find_dense_subspace(A, 1, Fraction(3, 4)) is None


class TestMaxLinefree:
    @pytest.mark.parametrize("k,n", [(2, 2), (2, 3), (3, 1), (3, 2)])
    def test_against_exhaustive_subsets(self, k, n):
        res = max_linefree(k, n)
        assert res.optimal and res.size == brute_max_linefree(k, n)
        assert find_line(res.witness) is None and len(res.witness) == res.size

    @pytest.mark.parametrize("n", range(1, 6))
    def test_sperner(self, n):
        assert max_linefree(2, n).size == math.comb(n, n // 2)

    def test_off_diagonal_is_extremal(self):
        assert max_linefree(3, 2).size == len(off_diagonal()) == 6

    def test_budget_gives_flagged_lower_bound(self):
        res = max_linefree(3, 3, SearchBudget(nodes=5))
        assert not res.optimal and find_line(res.witness) is None

    def test_parallel_matches_serial(self):
        a = max_linefree(3, 3)
        b = max_linefree(3, 3, SearchBudget(jobs=2))
        assert a.size == b.size == 18 and a.witness == b.witness

    def test_size_search(self):
        assert len(linefree_of_size(2, 4, 6)) >= 6
        assert linefree_of_size(2, 4, 7) is None
        with pytest.raises(BudgetExhausted):
            linefree_of_size(3, 3, 18, SearchBudget(nodes=3))


class TestDhjValue:
    def test_half(self):
        res = dhj_value(2, Fraction(1, 2), 6)
        assert res.value == 3 and res.label == "horizon-verified"
        assert res.witnesses[2].texts() == ["12", "21"]
        assert sorted(res.refuted) == [3, 4, 5, 6]

    def test_half_against_binomial_oracle(self):
        for n in range(3, 7):
            assert math.comb(n, n // 2) < math.ceil(2 ** n / 2)

    def test_one(self):
        assert dhj_value(2, Fraction(1), 4).value == 1

    def test_quarter_undetermined(self):
        res = dhj_value(2, Fraction(1, 4), 6)
        assert res.value is None and res.label == "undetermined"
        assert Fraction(math.comb(6, 3), 64) >= Fraction(1, 4)
        assert find_line(res.witnesses[6]) is None

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            dhj_value(2, Fraction(0), 3)


class TestGrSearch:
    def test_empty_family(self):
        res = gr_partition_search([], 1, 2, 2)
        assert not res.contained and res.subspace == next(iter(enumerate_subspaces(2, 2, 1)))

    def test_single_line(self):
        res = gr_partition_search([Subspace.parse("1a", 2)], 1, 2, 2)
        assert res.contained and str(res.subspace) == "1a"

    @pytest.mark.parametrize("n", [3, 4])
    def test_against_direct_check(self, n):
        # colour a line by whether its variable occurs once
        family = [L for L in enumerate_lines(2, n) if L.generator.symbols.count(-1) == 1]
        keys = {F.generator.symbols for F in family}
        res = gr_partition_search(family, 2, 2, n)
        mono = []
        for V in enumerate_subspaces(2, n, 2):
            inner = [L.generator.symbols in keys for L in lines_within(V)]
            if all(inner) or not any(inner):
                mono.append((V, all(inner)))
        if res is None:
            assert not mono
        else:
            assert (res.subspace, res.contained) == mono[0]

    def test_not_a_line(self):
        with pytest.raises(ValueError):
            gr_partition_search([Subspace.parse("ab", 2)], 1, 2, 2)
