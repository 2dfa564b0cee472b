from fractions import Fraction

import pytest

from dhj.bounds import OracleTable
from dhj.cube import enumerate_lines
from dhj.driver import TablePlan, ToyPlan, dhj_driver, dichotomy_step
from dhj.pointset import PointSet
from dhj.trace import Increment, LineFound, NotMet

from fixtures import off_diagonal, two_layer_set

Q = Fraction
PLAN = ToyPlan(m_d=1, M1=(1, 1), dims=(1,), M0=1)


def step(A, delta, d=1, plan=PLAN):
    p = plan.params(2, delta)
    return dichotomy_step(A, d, p, plan.schedule(2, d, p), plan.working_dim(2, d, p), 1)


class TestStep:
    def test_full_cube(self):
        assert isinstance(step(PointSet.full(3, 2), Q(1, 2)), LineFound)

    def test_off_diagonal(self):
        A = off_diagonal()
        out = step(A, Q(2, 3))
        assert isinstance(out, NotMet) and out.stage == "structured_set"
        gamma = PLAN.params(2, Q(2, 3)).gamma
        for L in enumerate_lines(3, 2):
            assert A.density_in(L) < Q(2, 3) + gamma / 2

    def test_increment_rechecked(self):
        A = two_layer_set()
        out = step(A, A.density())
        assert isinstance(out, Increment)
        gamma = PLAN.params(2, A.density()).gamma
        assert out.subspace.dim == 1
        assert A.density_in(out.subspace) == out.density >= A.density() + gamma / 2

    def test_trace_is_flagged_toy(self):
        out = step(two_layer_set(), two_layer_set().density())
        assert out.trace.flag == "toy" and out.trace.to_json()["flag"] == "toy"

    def test_density_precondition(self):
        with pytest.raises(ValueError):
            step(off_diagonal(), Q(3, 4))

    def test_scale(self):
        plan = ToyPlan(m_d=3, M1=(1, 1), dims=(1,), M0=1)
        out = step(off_diagonal(), Q(2, 3), plan=plan)
        assert isinstance(out, NotMet) and out.stage == "scale"


class TestDriver:
    def test_forced_full_cube(self):
        A = PointSet.full(3, 2)
        assert -(-9 * 9 // 10) == 9
        res = dhj_driver(A, Q(9, 10), 1, PLAN)
        assert res.status == "line_found" and res.rounds == 1
        assert all(w in A for w in res.line.points())

    def test_off_diagonal_ends_in_failure(self):
        res = dhj_driver(off_diagonal(), Q(2, 3), 1, PLAN)
        assert res.status == "hypothesis_not_met" and res.failure.stage == "structured_set"
        assert res.to_json()["failure"]["stage"] == "structured_set"

    def test_rounds_compose(self):
        A = two_layer_set()
        res = dhj_driver(A, A.density(), 1, PLAN)
        assert res.rounds == 2 and res.densities[0] == A.density()
        assert res.densities[1] == A.density_in(res.embedding) > res.densities[0]
        assert res.status == "hypothesis_not_met"

    def test_round_cap(self):
        res = dhj_driver(two_layer_set(), two_layer_set().density(), 1, PLAN, round_cap=1)
        assert res.status == "round_cap"

    def test_missing_oracle_values(self):
        res = dhj_driver(off_diagonal(), Q(2, 3), 1, TablePlan(OracleTable()))
        assert res.failure.stage == "parameters" and "dhj(2, 1/6)" in res.failure.reason

    def test_out_of_scale_widths(self):
        plan = TablePlan(OracleTable.parse("dhj 2 1/6 = 2"))
        res = dhj_driver(off_diagonal(), Q(2, 3), 1, plan)
        assert res.status == "hypothesis_not_met"
        assert res.failure.stage in ("parameters", "scale")


class TestPlans:
    def test_from_dict(self):
        plan = ToyPlan.from_dict({"m_d": 2, "M1": [2, 1], "dims": [1], "theta": "1/4"})
        assert plan.M1 == (2, 1) and plan.theta == Q(1, 4)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ToyPlan.from_dict({"m_d": 1, "speed": 3})

    def test_schedule_shape(self):
        p = PLAN.params(2, Q(1, 2))
        with pytest.raises(ValueError):
            ToyPlan(M1=(1,), dims=()).schedule(2, 1, p)
        s = PLAN.schedule(2, 1, p)
        assert [t.m for t in s] == [1, 1] and all(t.beta == p.beta for t in s)
