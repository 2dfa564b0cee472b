"""Exact evaluation of the numerical recursions behind the density increment.

All quantities are Python ints or ``Fraction``s.  Threshold numbers that the
argument only knows to exist (``dhj``, ``mdhj``, ``mdhj*``, ``gr``) come from an
:class:`OracleTable`; a missing entry raises :class:`MissingOracleValue` naming
the exact key, never an estimate.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping

Key = tuple  # (name, *args)


class MissingOracleValue(KeyError):
    def __init__(self, key: Key):
        super().__init__(format_key(key))
        self.key = key

    def __str__(self) -> str:
        return f"missing oracle value {format_key(self.key)}"


def format_key(key: Key) -> str:
    name, *args = key
    return f"{name}({', '.join(str(a) for a in args)})"


def parse_rational(text: str) -> Fraction:
    """Exact ``p/q`` (or integer) syntax; decimals are rejected."""
    text = text.strip()
    if not re.fullmatch(r"-?\d+(/\d+)?", text):
        raise ValueError(f"expected an exact rational p/q, got {text!r}")
    return Fraction(text)


def fmt_q(x: Fraction | int) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


_ARITY = {"dhj": 2, "mdhj": 3, "mdhj*": 3, "gr": 2}


class OracleTable:
    """Exact-key lookup of threshold numbers."""

    def __init__(self, entries: Mapping[Key, int] | None = None):
        self._entries: dict[Key, int] = {}
        for key, value in (entries or {}).items():
            self.set(key, value)

    def set(self, key: Key, value: int) -> None:
        name, *args = key
        if name not in _ARITY or len(args) != _ARITY[name]:
            raise ValueError(f"bad oracle key {key!r}")
        if name in ("dhj", "mdhj", "mdhj*"):
            args[-1] = Fraction(args[-1])
        self._entries[(name, *args)] = int(value)

    def get(self, key: Key) -> int:
        try:
            return self._entries[key]
        except KeyError:
            raise MissingOracleValue(key) from None

    def __contains__(self, key: Key) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def dhj(self, k: int, delta) -> int:
        return self.get(("dhj", k, Fraction(delta)))

    def gr(self, k: int, m: int) -> int:
        return self.get(("gr", k, m))

    @classmethod
    def parse(cls, text: str) -> "OracleTable":
        """Lines like ``dhj 2 1/4 = 9`` or ``gr 2 3 = 7``; ``#`` starts a comment."""
        table = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            lhs, eq, rhs = line.partition("=")
            parts = lhs.split()
            if not eq or not parts or parts[0] not in _ARITY or len(parts) - 1 != _ARITY[parts[0]]:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}")
            name, args = parts[0], parts[1:]
            try:
                ints = [int(a) for a in args[:-1]]
                last = parse_rational(args[-1]) if name != "gr" else int(args[-1])
                table.set((name, *ints, last), int(rhs))
            except ValueError as e:
                raise ValueError(f"line {lineno}: {e}") from None
        return table

    @classmethod
    def load(cls, path: str | Path) -> "OracleTable":
        return cls.parse(Path(path).read_text())

    def dump(self) -> str:
        return "".join(f"{k[0]} {' '.join(fmt_q(a) for a in k[1:])} = {v}\n"
                       for k, v in self._entries.items())


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class ProofParameters:
    """Numerical invariants for one density level ``delta`` over base alphabet ``k``.

    The sets being studied live in ``[k+1]^n``.  ``toy`` marks parameters
    that were overridden instead of derived from the defining formulas.
    """

    k: int
    delta: Fraction
    m0: int
    theta: Fraction
    eta: Fraction
    gamma: Fraction
    lam: Fraction
    M0: int
    toy: bool = False
    gr_dim: int | None = None  # GR(k, m) block dimension supplied for toy runs

    def __post_init__(self):
        for name in ("delta", "theta", "eta", "gamma", "lam"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.toy:
            return
        k, m0 = self.k, self.m0
        theta = (self.delta / 4) / ((k + 1) ** m0 - k ** m0)
        eta = self.delta * theta / 48
        expected = dict(theta=theta, eta=eta, gamma=self.delta * eta ** 2 / k,
                        lam=Fraction(k + 1, k), M0=max(m0, least_power_at_least(Fraction(k + 1, k), 1 / eta)))
        for name, value in expected.items():
            if getattr(self, name) != value:
                raise ValueError(f"{name}={getattr(self, name)} disagrees with its definition ({value})")
        if not self.eta < self.theta / 2:
            raise AssertionError("eta < theta/2 violated")
        if not self.eta ** 2 / 2 >= self.gamma:
            raise AssertionError("eta^2/2 >= gamma violated")

    @property
    def beta(self) -> Fraction:
        return self.gamma ** 2 / (4 * self.k)

    def with_overrides(self, **changes) -> "ProofParameters":
        return replace(self, toy=True, **changes)

    def as_dict(self) -> dict:
        return {"k": self.k, "delta": fmt_q(self.delta), "m0": self.m0, "theta": fmt_q(self.theta),
                "eta": fmt_q(self.eta), "gamma": fmt_q(self.gamma), "lambda": fmt_q(self.lam),
                "M0": self.M0, "gr_dim": self.gr_dim, "flag": "toy" if self.toy else "derived"}


def toy_parameters(k: int, delta, *, m0: int = 1, theta=None, eta=None, gamma=None,
                   M0: int | None = None, gr_dim: int | None = None) -> ProofParameters:
    """Desk-scale parameters; anything not given is derived from the defining formulas."""
    delta = Fraction(delta)
    theta = Fraction(theta) if theta is not None else (delta / 4) / ((k + 1) ** m0 - k ** m0)
    eta = Fraction(eta) if eta is not None else delta * theta / 48
    gamma = Fraction(gamma) if gamma is not None else delta * eta ** 2 / k
    lam = Fraction(k + 1, k)
    if M0 is None:
        M0 = max(m0, least_power_at_least(lam, 1 / eta))
    return ProofParameters(k, delta, m0, theta, eta, gamma, lam, M0, toy=True, gr_dim=gr_dim)


def least_power_at_least(base: Fraction, target: Fraction) -> int:
    """Least integer ``t >= 0`` with ``base**t >= target`` (exact, ``base > 1``)."""
    base, target = Fraction(base), Fraction(target)
    if base <= 1:
        raise ValueError("base must exceed 1")
    if target <= 1:
        return 0
    # start from the float estimate and correct exactly
    t = max(0, math.floor((math.log(target.numerator) - math.log(target.denominator)) /
                          (math.log(base.numerator) - math.log(base.denominator))) - 2)
    while base ** t < target:
        t += 1
    while t > 0 and base ** (t - 1) >= target:
        t -= 1
    return t


def base_params(k: int, delta, table: OracleTable) -> ProofParameters:
    """Derive the invariants from ``m0 = dhj(k, delta/4)``."""
    delta = Fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    m0 = table.dhj(k, delta / 4)
    theta = (delta / 4) / ((k + 1) ** m0 - k ** m0)
    eta = delta * theta / 48
    gamma = delta * eta ** 2 / k
    lam = Fraction(k + 1, k)
    M0 = max(m0, least_power_at_least(lam, 1 / eta))
    return ProofParameters(k, delta, m0, theta, eta, gamma, lam, M0)


# ---------------------------------------------------------------- recursions

def n_of(m: int, eps, k: int) -> Fraction:
    """``eps^-1 (k+1)^m m`` exactly (take ``math.ceil`` for the integer threshold)."""
    eps = Fraction(eps)
    if not 0 < eps <= 1 or m < 1:
        raise ValueError("need 0 < eps <= 1 and m >= 1")
    return (k + 1) ** m * m / eps


def _check_delta(delta) -> Fraction:
    delta = Fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError(f"delta={delta} must lie in (0, 1]")
    return delta


def mdhj_bound(k: int, m: int, delta, table: OracleTable) -> int:
    """Multidimensional threshold via ``mdhj(k,m+1,d) = M + mdhj(k,m, d/2 (k+1)^-M)``, ``M = dhj(k,d/2)``."""
    delta = _check_delta(delta)
    if m < 1:
        raise ValueError("m must be >= 1")
    if ("mdhj", k, m, delta) in table:
        return table.get(("mdhj", k, m, delta))
    if m == 1:
        return table.dhj(k, delta)
    M = table.dhj(k, delta / 2)
    return M + mdhj_bound(k, m - 1, delta / 2 / (k + 1) ** M, table)


def mdhj_star_bound(k: int, m: int, delta, table: OracleTable) -> int:
    """``ceil((delta/2)^-1 (k+1)^M M)`` with ``M = mdhj(k, m, delta/2)``."""
    delta = _check_delta(delta)
    if ("mdhj*", k, m, delta) in table:
        return table.get(("mdhj*", k, m, delta))
    M = mdhj_bound(k, m, delta / 2, table)
    return math.ceil(Fraction(2) / delta * (k + 1) ** M * M)


#: Exponents beyond this many bits are settled by magnitude instead of expansion.
_EXPANSION_LIMIT = 1 << 22


def _ceil_scaled_power(coef: Fraction, base: int, exponent: int) -> int:
    """``ceil(coef * base**exponent)`` for ``coef > 0``, exact even for huge negative exponents."""
    if exponent >= 0:
        if exponent * math.log2(base) > _EXPANSION_LIMIT:
            raise OverflowError(f"{base}^{exponent} is too large to expand")
        return math.ceil(coef * base ** exponent)
    if -exponent * math.log2(base) > _EXPANSION_LIMIT:
        # coef * base^exponent lies in (0, 1) as soon as base^-exponent > coef
        if coef.numerator.bit_length() - coef.denominator.bit_length() + 1 < -exponent * math.log2(base) - 1:
            return 1
        raise OverflowError("exponent too large to evaluate exactly")
    return math.ceil(coef / base ** -exponent)


def _m1(k: int, m: int, beta: Fraction, source) -> int:
    if isinstance(source, OracleTable):
        return mdhj_star_bound(k, m, beta, source)
    if callable(source):
        return int(source(m))
    if isinstance(source, Mapping):
        if m not in source:
            raise MissingOracleValue(("mdhj*", k, m, beta))
        return int(source[m])
    return int(source)


def F_of(m: int, beta, k: int, source) -> int:
    """``ceil(beta^-1 (k+1+m)^M1 (k+1)^(M1-m) M1)`` with ``M1 = mdhj*(k, m, beta)``.

    ``source`` is an OracleTable, a fixed ``M1``, a mapping ``m -> M1`` or a callable.
    """
    beta = _check_delta(beta)
    if m < 1:
        raise ValueError("m must be >= 1")
    M1 = _m1(k, m, beta, source)
    if M1 * math.log2(k + 1 + m) > _EXPANSION_LIMIT:
        raise OverflowError(f"({k + 1 + m})^{M1} is too large to expand")
    coef = Fraction((k + 1 + m) ** M1 * M1) / beta
    return _ceil_scaled_power(coef, k + 1, M1 - m)


def F_iter(r: int, m: int, beta, k: int, source) -> int:
    """``F^(1) = F`` and ``F^(r+1)(m, beta) = F^(r)(F(m, beta), beta)``."""
    if not 1 <= r <= k:
        raise ValueError(f"r={r} must lie in [1, {k}]")
    value = F_of(m, beta, k, source)
    for _ in range(r - 1):
        value = F_of(value, beta, k, source)
    return value


@dataclass
class BoundChain:
    """Result of :func:`N_of` with every intermediate quantity for audit."""

    value: Fraction
    params: ProofParameters
    beta: Fraction
    F_k: int
    m_d: int
    gr: int
    chain: list[tuple[str, object]] = field(default_factory=list)

    @property
    def ceiling(self) -> int:
        return math.ceil(self.value)


def N_of(k: int, d: int, delta, table: OracleTable, m1_source=None) -> BoundChain:
    """``n(GR(k, m(d)), eta^2/2)`` with ``beta = gamma^2/4k`` and ``m(d) = max(M0, F^(k)(d, beta))``."""
    p = base_params(k, delta, table)
    beta = p.gamma ** 2 / (4 * k)
    Fk = F_iter(k, d, beta, k, table if m1_source is None else m1_source)
    m_d = max(p.M0, Fk)
    try:
        gr = table.gr(k, m_d)
    except MissingOracleValue:
        raise MissingOracleValue(("gr", k, m_d)) from None
    value = n_of(gr, p.eta ** 2 / 2, k)
    chain = [("m0", p.m0), ("theta", p.theta), ("eta", p.eta), ("gamma", p.gamma),
             ("M0", p.M0), ("beta", beta), (f"F^({k})(d, beta)", Fk), ("m(d)", m_d),
             ("GR(k, m(d))", gr), ("N", value)]
    return BoundChain(value, p, beta, Fk, m_d, gr, chain)


def preview(x: int | Fraction, max_digits: int = 40) -> str:
    """Display-only rendering; huge values collapse to ``~10^e`` (or ``10^10^e``)."""
    x = Fraction(x)
    if x == 0:
        return "0"
    text = fmt_q(x)
    if len(text) <= max_digits:
        return text
    mag = _log10(x)
    if mag < 10 ** max_digits:
        return f"~10^{math.floor(mag)}"
    return f"~10^10^{math.floor(math.log10(mag))}"


def _log10(x: Fraction) -> float:
    def lg(v: int) -> float:
        b = v.bit_length()
        if b < 1000:
            return math.log10(v)
        return math.log10(v >> (b - 60)) + (b - 60) * math.log10(2)
    return lg(x.numerator) - lg(x.denominator)
