"""Hand-built point sets shared by several test modules."""
from __future__ import annotations

from fractions import Fraction
from itertools import product

from dhj.bounds import toy_parameters
from dhj.cube import Subspace
from dhj.engine import line_rich_at
from dhj.pointset import PointSet


def words(k: int, n: int, pred) -> list[str]:
    return ["".join(map(str, w)) for w in product(range(1, k + 1), repeat=n) if pred(w)]


def off_diagonal() -> PointSet:
    """[3]^2 without the diagonal line: line-free, density 2/3."""
    return PointSet.full(3, 2) - PointSet.from_words(3, 2, ["11", "22", "33"])


def two_layer_set() -> PointSet:
    """A line-free subset of [3]^4 whose restriction to [2]^4 is rich in lines.

    It is [2]^4 minus 2222, plus every word over {2, 3} that uses a 3.  A line
    through a 3-word must pass through 2222 or leave {2, 3}, so the set is
    line-free; 30 points in all.
    """
    low = words(3, 4, lambda w: max(w) <= 2 and w != (2, 2, 2, 2))
    high = words(3, 4, lambda w: min(w) >= 2 and 3 in w)
    return PointSet.from_words(3, 4, low + high)


def two_layer_params():
    return toy_parameters(2, Fraction(30, 81), m0=1, theta=Fraction(1, 4), eta=Fraction(1, 16),
                          M0=1, gr_dim=4)


def whole_cube_finder(A: PointSet):
    """A line finder that always proposes the whole ambient cube as the line-rich subspace."""
    W = Subspace.identity(A.k, A.n)
    return lambda B, m, p, tr: line_rich_at(B, W, p, tr)


def break_lines(A: PointSet, rng) -> PointSet:
    """Drop random points of A until no combinatorial line is left inside it."""
    from dhj.search import find_line
    bits = A.bits.copy()
    while True:
        B = PointSet(A.k, A.n, bits)
        L = find_line(B)
        if L is None:
            return B
        bits[rng.choice(list(L.indices()))] = False


def structured_core(AW: PointSet) -> PointSet:
    """Points x of [k+1]^m such that every substitution of the top letter lands in AW below the top."""
    K, m = AW.k, AW.n
    inside = set(AW.texts())
    keep = []
    for w in product(range(1, K + 1), repeat=m):
        images = [tuple(i if a == K else a for a in w) for i in range(1, K)]
        if all(K not in y and "".join(map(str, y)) in inside for y in images):
            keep.append("".join(map(str, w)))
    return PointSet.from_words(K, m, keep)
