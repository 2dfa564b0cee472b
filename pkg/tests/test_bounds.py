import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dhj.bounds import (F_iter, F_of, MissingOracleValue, N_of, OracleTable, ProofParameters,
                        base_params, least_power_at_least, mdhj_bound, mdhj_star_bound, n_of,
                        parse_rational, preview, toy_parameters)

Q = Fraction


def table(text="dhj 2 1/4 = 9\n"):
    return OracleTable.parse(text)


class TestParameters:
    def test_base_params(self):
        p = base_params(2, Q(1), table())
        assert 3 ** 9 - 2 ** 9 == 19171
        assert (p.m0, p.theta, p.eta) == (9, Q(1, 4) / 19171, Q(1, 3680832))
        assert p.theta == Q(1, 76684)
        assert p.gamma == Q(1, 2 * 3680832 ** 2)
        assert p.lam == Q(3, 2) and not p.toy

    def test_beta(self):
        p = base_params(2, Q(1), table())
        assert p.beta == p.gamma ** 2 / 8

    def test_relations_hold(self):
        p = base_params(2, Q(1), table())
        assert p.eta < p.theta / 2 and p.eta ** 2 / 2 >= p.gamma
        assert p.lam ** -p.M0 <= p.eta < p.lam ** -(p.M0 - 1)

    def test_missing_entry(self):
        with pytest.raises(MissingOracleValue) as e:
            base_params(2, Q(1, 2), table())
        assert e.value.key == ("dhj", 2, Q(1, 8))

    def test_inconsistent_values_rejected(self):
        p = base_params(2, Q(1), table())
        with pytest.raises(ValueError):
            ProofParameters(2, p.delta, p.m0, p.theta * 2, p.eta, p.gamma, p.lam, p.M0)

    def test_toy_overrides(self):
        p = toy_parameters(2, Q(1, 2), theta=Q(1, 4), eta=Q(1, 16), M0=1)
        assert p.toy and p.gamma == Q(1, 2) * Q(1, 256) / 2
        assert p.as_dict()["flag"] == "toy"

    @settings(max_examples=100, deadline=None)
    @given(st.fractions(Q(1, 1000), 10), st.fractions(Q(1, 10 ** 6), Q(1, 2)))
    def test_least_power(self, growth, target):
        base = 1 + growth
        t = least_power_at_least(base, 1 / target)
        assert base ** t >= 1 / target
        assert t == 0 or base ** (t - 1) < 1 / target


class TestRecursions:
    @pytest.mark.parametrize("m,eps,k,expected", [(1, Q(1, 2), 2, 6), (1, Q(1), 2, 3),
                                                  (9, Q(1, 2), 2, 354294)])
    def test_n_of(self, m, eps, k, expected):
        assert n_of(m, eps, k) == expected == (k + 1) ** m * m / eps

    def test_mdhj_base_case(self):
        assert mdhj_bound(2, 1, Q(1, 2), table("dhj 2 1/2 = 3")) == 3

    def test_mdhj_step(self):
        assert Q(1, 2) * Q(1, 2) / 3 ** 9 == Q(1, 78732)
        t = table("dhj 2 1/4 = 9\ndhj 2 1/78732 = 1000\n")
        assert mdhj_bound(2, 2, Q(1, 2), t) == 1009

    def test_mdhj_reports_first_missing_key(self):
        with pytest.raises(MissingOracleValue) as e:
            mdhj_bound(2, 2, Q(1, 2), OracleTable())
        assert str(e.value) == "missing oracle value dhj(2, 1/4)"
        with pytest.raises(MissingOracleValue) as e:
            mdhj_bound(2, 2, Q(1, 2), table())
        assert e.value.key == ("dhj", 2, Q(1, 78732))

    def test_mdhj_star(self):
        assert 4 * 3 ** 9 * 9 == 708588
        assert mdhj_star_bound(2, 1, Q(1, 2), table()) == 708588

    def test_F(self):
        assert math.ceil(2 * 4 ** 2 * 3 * 2) == 192
        assert F_of(1, Q(1, 2), 2, 2) == 192
        for k, m in [(2, 1), (2, 3), (3, 2)]:
            assert F_of(m, Q(1), k, m) == (k + 1 + m) ** m * m

    def test_F_iter(self):
        assert F_iter(1, 1, Q(1, 2), 2, 2) == F_of(1, Q(1, 2), 2, 2)
        widths = {1: 2, 192: 193}
        assert F_iter(2, 1, Q(1, 2), 2, widths) == F_of(F_of(1, Q(1, 2), 2, widths), Q(1, 2), 2, widths)
        with pytest.raises(MissingOracleValue):
            F_iter(2, 1, Q(1, 2), 2, {1: 2})

    def test_F_refuses_astronomical_expansion(self):
        with pytest.raises(OverflowError):
            F_of(10 ** 12, Q(1, 2), 2, lambda m: m)

    def test_repeatable(self):
        assert mdhj_star_bound(2, 1, Q(1, 2), table()) == mdhj_star_bound(2, 1, Q(1, 2), table())


class TestN:
    def test_stubbed_chain(self):
        t = table()
        with pytest.raises(MissingOracleValue) as e:
            N_of(2, 1, Q(1), t, m1_source=lambda m: 1)
        assert e.value.key[:2] == ("gr", 2)
        m_d = e.value.key[2]
        t.set(("gr", 2, m_d), m_d)
        chain = N_of(2, 1, Q(1), t, m1_source=lambda m: 1)
        p = base_params(2, Q(1), t)
        assert chain.m_d == max(p.M0, F_iter(2, 1, p.beta, 2, lambda m: 1)) == m_d
        assert chain.value == 3 ** m_d * m_d / (p.eta ** 2 / 2)
        assert chain.value.denominator == 1
        names = [name for name, _ in chain.chain]
        assert names[:5] == ["m0", "theta", "eta", "gamma", "M0"] and names[-1] == "N"
        assert chain.beta == p.gamma ** 2 / 4 / 2


class TestTable:
    def test_round_trip(self):
        t = table("dhj 2 1/4 = 9\ngr 2 3 = 7  # a stub\nmdhj 2 2 1/2 = 11\n")
        assert OracleTable.parse(t.dump()).dump() == t.dump()
        assert t.gr(2, 3) == 7 and mdhj_bound(2, 2, Q(1, 2), t) == 11

    @pytest.mark.parametrize("text", ["dhj 2 = 9", "dhj 2 0.25 = 9", "foo 1 = 2", "dhj 2 1/4 9"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            OracleTable.parse(text)

    def test_rationals_are_exact(self):
        assert parse_rational("3/12") == Q(1, 4)
        with pytest.raises(ValueError):
            parse_rational("0.25")


def test_preview():
    assert preview(192) == "192"
    assert preview(Q(10 ** 100)) == "~10^100"
