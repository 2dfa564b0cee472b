import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dhj.bounds import OracleTable, toy_parameters
from dhj.cube import Subspace, enumerate_lines, lines_within
from dhj.engine import (Correlation, LineRich, Structured, correlate, extract_uniform_lines,
                        line_dichotomy, line_rich_at, multidim_lift, restricted_lift,
                        structured_set, uniformize)
from dhj.insensitive import is_insensitive, is_insensitive_in
from dhj.pointset import PointSet
from dhj.search import find_line, verify_contained
from dhj.suites import random_set
from dhj.trace import CertificateError, Exhausted, HypothesisNotMet, Increment, LineFound

from fixtures import (break_lines, off_diagonal, structured_core, two_layer_params, two_layer_set,
                      whole_cube_finder)

Q = Fraction


def toy(delta, **kw):
    kw.setdefault("M0", 1)
    kw.setdefault("gr_dim", 1)
    return toy_parameters(2, delta, **kw)


class TestUniformize:
    def test_first_coordinate_fixed(self):
        A = PointSet.from_predicate(2, 3, lambda d: d[:, 0] == 1)
        l, V, tr = uniformize(A, 1, Q(1, 4))
        assert (l, str(V)) == (2, "1a")
        for x in V.points():
            assert A.slice(x).density() == 1 >= A.density() - Q(1, 4)

    def test_full_cube_accepts_first_round(self):
        l, V, tr = uniformize(PointSet.full(3, 2), 1, Q(1, 2))
        assert (l, str(V)) == (1, "a") and len(tr.rounds) == 1

    def test_sparse_set_is_immediate(self):
        A = PointSet.from_words(2, 3, ["111"])
        l, V, tr = uniformize(A, 2, Q(1, 2))
        assert V == Subspace.identity(2, 2) and tr.outcome == "uniform"

    def test_no_room(self):
        with pytest.raises(Exhausted):
            uniformize(PointSet.full(2, 2), 2, Q(1, 2))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32), st.sampled_from([(2, 1, Q(1, 2), 6), (3, 1, Q(1, 2), 5),
                                                       (2, 2, Q(3, 4), 7)]))
    def test_postcondition(self, seed, case):
        k, m, eps, n = case
        A = random_set(random.Random(seed), k, n)
        rho = eps / (k ** m - 1)
        try:
            l, V, tr = uniformize(A, m, eps)
        except Exhausted:
            assert n < k ** m * m / eps
            return
        assert len(tr.rounds) <= int(1 / rho) + 1
        assert V.dim == m and V.n == l
        assert all(A.slice(x).density() >= A.density() - eps for x in V.points())


class TestMultidimLift:
    def test_full_cube(self):
        A = PointSet.full(2, 4)
        V = multidim_lift(A, 2, block_lengths=[2])
        assert V.dim == 2 and verify_contained(A, V)

    def test_trace_records_vote(self):
        from dhj.trace import ProcedureTrace
        tr = ProcedureTrace("multidim_lift")
        multidim_lift(PointSet.full(3, 4), 2, block_lengths=[2], trace=tr)
        assert tr.rounds[0]["votes"] >= 1 and tr.children

    def test_one_dimension_delegates(self):
        calls = []

        def oracle(A):
            calls.append(A)
            return find_line(A)
        A = PointSet.from_words(2, 2, ["11", "12", "21"])
        assert str(multidim_lift(A, 1, oracle)) == "1a" and len(calls) == 1

    def test_antichain(self):
        with pytest.raises(Exhausted):
            multidim_lift(PointSet.from_words(2, 2, ["12", "21"]), 1)

    def test_block_length_from_table(self):
        A = PointSet.full(2, 3)
        V = multidim_lift(A, 2, table=OracleTable.parse("dhj 2 1/2 = 1"), delta=Q(1))
        assert V.dim == 2 and verify_contained(A, V)

    def test_block_length_not_guessed(self):
        with pytest.raises(ValueError):
            multidim_lift(PointSet.full(2, 3), 2)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32))
    def test_results_are_contained(self, seed):
        A = random_set(random.Random(seed), 3, 4, 0.8)
        try:
            V = multidim_lift(A, 2, block_lengths=[2])
        except Exhausted:
            return
        assert V.dim == 2 and verify_contained(A, V)


class TestRestrictedLift:
    def test_missing_corner(self):
        A = PointSet.full(3, 2) - PointSet.from_words(3, 2, ["33"])
        V = restricted_lift(A, 1, M=1)
        assert V.dim == 1 and verify_contained(A, V, 2)

    def test_full_cube(self):
        V = restricted_lift(PointSet.full(3, 3), 1, M=1)
        assert verify_contained(PointSet.full(3, 3), V)

    def test_empty(self):
        with pytest.raises(Exhausted):
            restricted_lift(PointSet.empty(3, 2), 1, M=1)

    def test_needs_block_dimension(self):
        with pytest.raises(ValueError):
            restricted_lift(PointSet.full(3, 2), 1)


class TestExtractUniformLines:
    def test_full_cube(self):
        A = PointSet.full(3, 3)
        p = toy(Q(1, 2))
        l, U, tr = extract_uniform_lines(A, 1, p)
        assert U.dim == 1 and U.n == l < 3 and tr.outcome == "uniform_lines"

    def test_postconditions_rechecked(self):
        A = PointSet.from_predicate(3, 4, lambda d: d[:, 0] != 3)
        p = toy(A.density())
        l, U, tr = extract_uniform_lines(A, 1, p)
        eps = p.eta ** 2 / 2
        for u in U.points():
            assert A.slice(u).density() >= p.delta - eps
        for L in lines_within(Subspace.identity(2, U.dim)):
            pts = [U.embed(w) for w in L.points()]
            common = A.slice(pts[0])
            for u in pts[1:]:
                common = common & A.slice(u)
            assert common.density() >= p.theta

    def test_empty(self):
        with pytest.raises(HypothesisNotMet) as e:
            extract_uniform_lines(PointSet.empty(3, 3), 1, toy(Q(1, 2)))
        assert e.value.stage == "uniformize"


class TestLineDichotomy:
    def test_full_cube_is_an_increment(self):
        out = line_dichotomy(PointSet.full(3, 2), 1, toy(Q(1, 2)))
        assert isinstance(out, Increment) and out.density == 1

    def test_empty(self):
        with pytest.raises(HypothesisNotMet):
            line_dichotomy(PointSet.empty(3, 3), 1, toy(Q(1, 2)))

    def test_line_rich_fibre(self):
        A = off_diagonal()
        p = toy(Q(2, 3))
        out = line_dichotomy(A, 1, p)
        assert isinstance(out, LineRich) and str(out.subspace) == "a3"
        W = out.subspace
        assert verify_contained(A, W, 2) and out.rich_lines == 1
        assert A.density_in(W) >= p.delta - 2 * p.eta

    def test_caller_chosen_subspace(self):
        A = two_layer_set()
        out = line_rich_at(A, Subspace.identity(3, 4), two_layer_params())
        lines2 = list(enumerate_lines(2, 4))
        rich = sum(verify_contained(A, L.lift(3), 2) for L in lines2)
        # lines of [2]^4 through 2222 are those whose constants are all 2
        assert isinstance(out, LineRich) and out.rich_lines == rich == 65 - (2 ** 4 - 1)
        assert rich >= two_layer_params().theta / 2 * len(lines2)


class TestStructuredSet:
    def test_line_short_circuit(self):
        assert isinstance(structured_set(PointSet.full(3, 2), 1, toy(Q(1, 2))), LineFound)

    def test_partition_fixture(self):
        A, p = two_layer_set(), two_layer_params()
        st_ = structured_set(A, 4, p, line_finder=whole_cube_finder(A))
        assert isinstance(st_, Structured)
        W = st_.subspace
        AW = A.pullback(W)
        assert st_.core == structured_core(AW)
        for i, Ci in enumerate(st_.parts, 1):
            assert is_insensitive(Ci, (i, 3))
            assert is_insensitive_in(Ci.pushforward(W), W, (i, 3))
        assert (AW & st_.core).density() <= p.lam ** -4
        outside = ~st_.core
        assert st_.core.density() >= p.theta / 4
        assert (AW & outside).density() >= (p.delta + 6 * p.eta) * outside.density()
        assert (AW & outside).density() >= p.delta - 3 * p.eta

    def test_off_diagonal_fails_named_inequality(self):
        with pytest.raises(HypothesisNotMet) as e:
            structured_set(off_diagonal(), 1, toy(Q(2, 3)))
        assert e.value.stage == "structured_set"
        assert "absolute density outside C" in e.value.reason


class TestCorrelate:
    def test_full_cube_early_branch(self):
        # the full cube contains a line, so correlate short-circuits
        assert isinstance(correlate(PointSet.full(3, 2), 1, toy(Q(1, 2))), LineFound)

    def test_early_branch_on_line_free_set(self):
        A = two_layer_set()
        p = toy(A.density())
        out = correlate(A, 1, p)
        assert isinstance(out, Correlation) and out.early
        assert out.core == PointSet.full(3, 1)
        assert A.density_in(out.subspace) >= p.delta + p.eta ** 2 / 2

    def test_partition_branch(self):
        A, p = two_layer_set(), two_layer_params()
        out = correlate(A, 4, p, line_finder=whole_cube_finder(A))
        assert isinstance(out, Correlation) and not out.early
        hits = np.sum([P.bits for P in out.partition], axis=0)
        assert hits.max() == 1 and np.array_equal(hits > 0, out.outside.bits)
        lam = [P.density() / out.outside.density() for P in out.partition]
        AW = A.pullback(out.subspace)
        dl = [(AW & P).density() / P.density() if len(P) else Q(0) for P in out.partition]
        assert sum(a * b for a, b in zip(lam, dl)) >= p.delta + 6 * p.eta
        D = out.core
        assert D.density() >= p.gamma
        assert (AW & D).density() >= (p.delta + p.gamma) * D.density()
        assert out.trace.rounds[-1]["i0"] == 2

    def test_needs_working_dimension(self):
        with pytest.raises(ValueError):
            correlate(off_diagonal(), 1, toy(Q(2, 3), M0=3))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32))
    def test_random_audit(self, seed):
        rng = random.Random(seed)
        B = break_lines(random_set(rng, 3, 3, rng.uniform(0.4, 0.9)), rng)
        if not len(B):
            return
        p = toy(B.density())
        try:
            out = correlate(B, 2, p)
        except HypothesisNotMet:
            return
        assert isinstance(out, Correlation)
        D = out.core
        AD = B.pullback(out.subspace) & D
        assert D.density() >= p.gamma and AD.density() >= (p.delta + p.gamma) * D.density()


def test_recheck_failure_is_an_internal_error():
    from dhj.trace import ProcedureTrace
    tr = ProcedureTrace("demo")
    with pytest.raises(CertificateError):
        tr.certify("impossible", False)
    with pytest.raises(HypothesisNotMet):
        tr.require("stage", "needed", False)
    tr.note("advisory", False)
    assert tr.checks[-1]["enforced"] is False
