"""(i,j)-equivalence, (i,j)-insensitive sets and letter substitutions.

Two words are (i,j)-equivalent when every letter outside {i, j} occupies the
same positions in both.  Replacing every ``j`` by ``i`` maps each word to a
representative of its class, so all the class computations below reduce to
grouping the cube by that representative.
"""
from __future__ import annotations

import functools
import random
from dataclasses import dataclass

import numpy as np

from dhj.cube import Subspace, Word, digits, place_values
from dhj.pointset import PointSet


@dataclass(frozen=True)
class LetterPair:
    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"letters must differ, got ({self.i}, {self.j})")
        if self.i < 1 or self.j < 1:
            raise ValueError(f"letters are positive, got ({self.i}, {self.j})")

    def check(self, k: int) -> None:
        if max(self.i, self.j) > k:
            raise ValueError(f"pair ({self.i}, {self.j}) out of range for k={k}")


def _pair(p) -> LetterPair:
    return p if isinstance(p, LetterPair) else LetterPair(*p)


def equivalent(x: Word, y: Word, p: LetterPair | tuple[int, int]) -> bool:
    p = _pair(p)
    if (x.k, x.n) != (y.k, y.n):
        raise ValueError("ambient mismatch")
    p.check(x.k)
    return all(a == b or (a in (p.i, p.j) and b in (p.i, p.j))
               for a, b in zip(x.letters, y.letters))


def substitute(x: Word, source: int, target: int) -> Word:
    """Replace every occurrence of ``source`` in ``x`` by ``target``."""
    for a in (source, target):
        if not 1 <= a <= x.k:
            raise ValueError(f"letter {a} out of range for k={x.k}")
    return Word(x.k, tuple(target if a == source else a for a in x.letters))


@functools.lru_cache(maxsize=128)
def substitution_map(k: int, n: int, source: int, target: int) -> np.ndarray:
    """Index of ``x^{source -> target}`` for every ``x`` in ``[k]^n``."""
    d = digits(k, n).astype(np.int64)
    d = np.where(d == source, target, d)
    out = (d - 1) @ place_values(k, n)
    out.setflags(write=False)
    return out


def class_representatives(k: int, n: int, p: LetterPair | tuple[int, int]) -> np.ndarray:
    p = _pair(p)
    p.check(k)
    return substitution_map(k, n, p.j, p.i)


def is_insensitive(A: PointSet, p: LetterPair | tuple[int, int]) -> bool:
    return bool(np.array_equal(A.bits, insensitive_closure(A, p).bits))


def insensitive_closure(A: PointSet, p: LetterPair | tuple[int, int]) -> PointSet:
    """Smallest (i,j)-insensitive superset of ``A``."""
    rep = class_representatives(A.k, A.n, p)
    hit = np.zeros(A.size, dtype=bool)
    hit[rep[A.bits]] = True
    return PointSet(A.k, A.n, hit[rep])


def is_insensitive_in(A: PointSet, V: Subspace, p: LetterPair | tuple[int, int]) -> bool:
    """Insensitivity of ``A ∩ V`` relative to ``V``, tested in the model cube ``[k]^m``."""
    return is_insensitive(A.pullback(V), p)


def insensitive_by_positions(A: PointSet, p: LetterPair | tuple[int, int]) -> bool:
    """Definitional scan: membership depends only on positions of letters outside {i, j}."""
    p = _pair(p)
    p.check(A.k)
    seen: dict[tuple, bool] = {}
    d = digits(A.k, A.n)
    for idx in range(A.size):
        key = tuple(tuple(np.flatnonzero(d[idx] == s)) for s in range(1, A.k + 1)
                    if s not in (p.i, p.j))
        member = bool(A.bits[idx])
        if seen.setdefault(key, member) != member:
            return False
    return True


def random_insensitive(k: int, n: int, p: LetterPair | tuple[int, int],
                       rng: random.Random, keep: float = 0.5) -> PointSet:
    """Union of a random selection of (i,j)-equivalence classes (each kept with prob ``keep``)."""
    rep = class_representatives(k, n, p)
    reps = np.unique(rep)
    chosen = np.zeros(k ** n, dtype=bool)
    for r in reps:
        if rng.random() < keep:
            chosen[r] = True
    return PointSet(k, n, chosen[rep])
