"""Seeded invariant suites shared by the ``verify`` command and the test-suite."""
from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction
from typing import Callable

import numpy as np

from dhj.cube import count_lines, enumerate_lines
from dhj.engine import uniformize
from dhj.insensitive import (equivalent, insensitive_by_positions, insensitive_closure,
                             is_insensitive, random_insensitive)
from dhj.cube import Word
from dhj.pointset import PointSet, emit_wordset, parse_wordset
from dhj.tiling import TilingParameters, tile_insensitive
from dhj.trace import HypothesisNotMet

Tally = Counter


def random_set(rng: random.Random, k: int, n: int, p: float | None = None) -> PointSet:
    p = rng.random() if p is None else p
    bits = np.array([rng.random() < p for _ in range(k ** n)], dtype=bool)
    return PointSet(k, n, bits)


def _tick(t: Tally, name: str, ok: bool) -> None:
    t[(name, "total")] += 1
    if ok:
        t[(name, "passed")] += 1


def slice_averaging(seed: int = 0, cases: int = 200) -> Tally:
    rng = random.Random(seed)
    t: Tally = Counter()
    for _ in range(cases):
        k, n = rng.choice([2, 3, 4]), rng.randint(2, 5)
        A = random_set(rng, k, n)
        l = rng.randint(1, n - 1)
        counts = A.slice_counts(l)
        mean = sum(Fraction(int(c), k ** (n - l)) for c in counts) / k ** l
        _tick(t, "mean slice density = density", mean == A.density())
        x = Word.from_index(rng.randrange(k ** l), k, l)
        _tick(t, "slice agrees with counts", len(A.slice(x)) == int(counts[x.index]))
    return t


def _reshuffle(x: Word, i: int, j: int, rng: random.Random) -> Word:
    """Reassign letters i/j at their positions at random: an (i,j)-equivalent word."""
    return Word(x.k, tuple(rng.choice((i, j)) if a in (i, j) else a for a in x.letters))


def insensitivity_laws(seed: int = 0, cases: int = 200) -> Tally:
    rng = random.Random(seed)
    t: Tally = Counter()
    for _ in range(cases):
        n = rng.randint(1, 5)
        i, j = rng.sample([1, 2, 3], 2)
        X = random_insensitive(3, n, (i, j), rng, rng.random())
        Y = random_insensitive(3, n, (i, j), rng, rng.random())
        Z = random_set(rng, 3, n)
        for name, S in (("intersection", X & Y), ("union", X | Y), ("complement", ~X)):
            _tick(t, f"closed under {name}", is_insensitive(S, (i, j)))
        for S in (X, Z):
            _tick(t, "agrees with positional scan",
                  is_insensitive(S, (i, j)) == insensitive_by_positions(S, (i, j)))
        cl = insensitive_closure(Z, (i, j))
        _tick(t, "closure is least insensitive superset",
              Z.issubset(cl) and is_insensitive(cl, (i, j)) and
              cl.issubset(insensitive_closure(Z | X, (i, j))) and
              insensitive_closure(cl, (i, j)) == cl)
        a = Word.from_index(rng.randrange(3 ** n), 3, n)
        b, c = _reshuffle(a, i, j, rng), None
        c = _reshuffle(b, i, j, rng) if rng.random() < 0.5 else \
            Word.from_index(rng.randrange(3 ** n), 3, n)
        _tick(t, "reshuffled word is equivalent", equivalent(a, b, (i, j)))
        _tick(t, "reflexive", equivalent(a, a, (i, j)))
        _tick(t, "symmetric", equivalent(a, b, (i, j)) == equivalent(b, a, (i, j)))
        _tick(t, "transitive", not (equivalent(a, b, (i, j)) and equivalent(b, c, (i, j)))
              or equivalent(a, c, (i, j)))
    return t


def line_count(seed: int = 0, cases: int = 0) -> Tally:
    t: Tally = Counter()
    for k in (2, 3, 4):
        for n in range(1, 6):
            _tick(t, "count matches enumeration", count_lines(k, n) == sum(1 for _ in enumerate_lines(k, n)))
    return t


def uniformize_suite(seed: int = 0, cases: int = 100) -> Tally:
    rng = random.Random(seed)
    t: Tally = Counter()
    eps, k, m, n = Fraction(1, 2), 2, 1, 6
    rho = eps / (k ** m - 1)
    done = 0
    while done < cases:
        A = random_set(rng, k, n)
        if A.density() <= eps:
            continue
        done += 1
        try:
            l, V, tr = uniformize(A, m, eps)
        except HypothesisNotMet:
            _tick(t, "succeeds", False)
            continue
        _tick(t, "succeeds", True)
        _tick(t, "rounds <= 1/rho + 1", len(tr.rounds) <= int(1 / rho) + 1)
        _tick(t, "slices dense", all(A.slice(w).density() >= A.density() - eps for w in V.points()))
    return t


def tiling_suite(seed: int = 0, cases: int = 50) -> Tally:
    rng = random.Random(seed)
    t: Tally = Counter()
    params = TilingParameters(2, Fraction(1, 4), 1, 2)
    for _ in range(cases):
        i = rng.choice([1, 2])
        D = random_insensitive(3, 6, (i, 3), rng, rng.choice([0.5, 0.8]))
        try:
            T = tile_insensitive(D, i, params)
        except HypothesisNotMet:
            _tick(t, "tiling completes", False)
            continue
        _tick(t, "tiling completes", True)
        hits = np.zeros(D.size, dtype=int)
        for V in T.members:
            np.add.at(hits, V.indices(), 1)
        _tick(t, "pairwise disjoint", hits.max(initial=0) <= 1)
        _tick(t, "inside D", not np.any((hits > 0) & ~D.bits))
        _tick(t, "residual < 2 beta", (D - PointSet(3, 6, hits > 0)).density() < 2 * params.beta)
        _tick(t, "rounds <= 1/Theta", T.rounds <= params.round_cap)
    return t


def wordset_roundtrip(seed: int = 0, cases: int = 50) -> Tally:
    rng = random.Random(seed)
    t: Tally = Counter()
    for _ in range(cases):
        k, n = rng.choice([2, 3, 4, 11]), rng.randint(1, 4)
        A = random_set(rng, k, n)
        text = emit_wordset(A)
        B = parse_wordset(text)
        _tick(t, "parse(emit(A)) = A", B == A)
        _tick(t, "emit(parse(f)) = f", emit_wordset(B) == text)
    return t


SUITES: dict[str, Callable[..., Tally]] = {
    "slice-averaging": slice_averaging,
    "insensitivity": insensitivity_laws,
    "line-count": line_count,
    "uniformize": uniformize_suite,
    "tiling": tiling_suite,
    "wordset-roundtrip": wordset_roundtrip,
}


def tallies(t: Tally) -> dict[str, tuple[int, int]]:
    names = sorted({name for name, _ in t})
    return {name: (t[(name, "passed")], t[(name, "total")]) for name in names}
