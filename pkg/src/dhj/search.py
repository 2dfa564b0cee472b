"""Exhaustive finders and branch-and-bound ground truth.

Everything here answers by exhaustive search with lexicographic tie-breaking
(canonical variable words, symbol order ``1 < ... < k < v_1 < ... < v_m``),
so a ``None`` answer is a proof of absence within the searched ambient.
"""
from __future__ import annotations

import functools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from dhj.cube import (Subspace, check_ambient, digits, enumerate_subspaces, line_matrix,
                      lines_within, subspace_chunks)
from dhj.pointset import PointSet, at_least


class BudgetExhausted(RuntimeError):
    """A search cap was hit before the answer was settled (never a wrong answer)."""

    def __init__(self, msg: str, nodes: int = 0):
        super().__init__(msg)
        self.nodes = nodes


@dataclass(frozen=True)
class SearchBudget:
    nodes: int | None = None
    seconds: float | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.nodes is not None and self.nodes <= 0:
            raise ValueError("node cap must be positive")
        if self.seconds is not None and self.seconds <= 0:
            raise ValueError("time cap must be positive")
        if self.jobs < 1:
            raise ValueError("parallelism width must be >= 1")


UNLIMITED = SearchBudget()


class _Meter:
    def __init__(self, budget: SearchBudget | None):
        budget = budget or UNLIMITED
        self.cap = budget.nodes
        self.deadline = None if budget.seconds is None else time.monotonic() + budget.seconds
        self.nodes = 0

    def tick(self, amount: int = 1) -> None:
        self.nodes += amount
        if self.cap is not None and self.nodes > self.cap:
            raise BudgetExhausted(f"node cap {self.cap} exceeded", self.nodes)
        if self.deadline is not None and (self.nodes & 255 == 0 or amount > 1) \
                and time.monotonic() > self.deadline:
            raise BudgetExhausted("time cap exceeded", self.nodes)


# ---------------------------------------------------------------- finders

def find_line(A: PointSet, budget: SearchBudget | None = None) -> Subspace | None:
    """Lexicographically first combinatorial line contained in ``A``."""
    meter = _Meter(budget)
    lines, mat = line_matrix(A.k, A.n)
    for start in range(0, len(lines), 4096):
        block = mat[start:start + 4096]
        meter.tick(len(block))
        hit = np.flatnonzero(A.bits[block].all(axis=1))
        if hit.size:
            return lines[start + int(hit[0])]
    return None


def _first_subspace(A: PointSet, m: int, kprime: int | None, budget) -> Subspace | None:
    meter = _Meter(budget)
    for subs, mat in subspace_chunks(A.k, A.n, m, kprime):
        meter.tick(len(subs))
        hit = np.flatnonzero(A.bits[mat].all(axis=1))
        if hit.size:
            return subs[int(hit[0])]
    return None


def find_subspace(A: PointSet, m: int, budget: SearchBudget | None = None) -> Subspace | None:
    """Lexicographically first m-dimensional subspace contained in ``A``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return _first_subspace(A, m, None, budget)


def find_restricted_subspace(A: PointSet, m: int,
                             budget: SearchBudget | None = None) -> Subspace | None:
    """First m-dim subspace ``V`` of ``[k+1]^n`` (``k+1 = A.k``) with ``V|k ⊆ A``."""
    if A.k < 3:
        raise ValueError("restricted search needs an ambient alphabet of size >= 3")
    if m < 1:
        raise ValueError("m must be >= 1")
    return _first_subspace(A, m, A.k - 1, budget)


def find_dense_subspace(A: PointSet, m: int, threshold: Fraction,
                        budget: SearchBudget | None = None) -> tuple[Subspace, Fraction] | None:
    """First m-dim subspace ``X`` with ``dens_X(A) >= threshold``, with that density."""
    meter = _Meter(budget)
    size = A.k ** m
    for subs, mat in subspace_chunks(A.k, A.n, m):
        meter.tick(len(subs))
        counts = A.bits[mat].sum(axis=1)
        hit = np.flatnonzero(at_least(counts, size, threshold))
        if hit.size:
            i = int(hit[0])
            return subs[i], Fraction(int(counts[i]), size)
    return None


def verify_contained(A: PointSet, V: Subspace, kprime: int | None = None) -> bool:
    """Independent point-by-point recheck that ``V`` (or ``V|k'``) lies in ``A``."""
    kprime = V.k if kprime is None else kprime
    from itertools import product
    for a in product(range(1, kprime + 1), repeat=V.dim):
        if V.generator.instantiate(a) not in A:
            return False
    return True


# ---------------------------------------------------------------- GR search

@dataclass(frozen=True)
class GRResult:
    subspace: Subspace
    contained: bool  # True: Lines(V) ⊆ L; False: Lines(V) ∩ L = ∅


def gr_partition_search(lines: Iterable[Subspace], m: int, k: int, n: int,
                        budget: SearchBudget | None = None) -> GRResult | None:
    """First m-dim subspace whose lines all lie in ``lines`` or all avoid it."""
    if m < 1:
        raise ValueError("m must be >= 1")
    family = set()
    for ell in lines:
        if (ell.k, ell.n) != (k, n) or ell.dim != 1:
            raise ValueError(f"{ell} is not a line of [{k}]^{n}")
        family.add(ell.generator.symbols)
    meter = _Meter(budget)
    for V in enumerate_subspaces(k, n, m):
        meter.tick()
        inside = [ell.generator.symbols in family for ell in lines_within(V)]
        if all(inside):
            return GRResult(V, True)
        if not any(inside):
            return GRResult(V, False)
    return None


# ---------------------------------------------------------------- line-free B&B

def _popcount(x: int) -> int:
    return bin(x).count("1")


class _Cube:
    """Bitmask view of ``[k]^n`` for the branch-and-bound."""

    def __init__(self, k: int, n: int):
        self.k, self.n = k, n
        self.size = check_ambient(k, n)
        _, mat = line_matrix(k, n)
        self.lines = [sum(1 << int(i) for i in row) for row in mat]
        self.through: list[list[int]] = [[] for _ in range(self.size)]
        for L in self.lines:
            for i in _bits_of(L):
                self.through[i].append(L)
        d = digits(k, n)
        counts = np.stack([(d == a).sum(axis=1) for a in range(1, k + 1)], axis=1)
        self.imbalance = (counts.max(axis=1) - counts.min(axis=1)).tolist()
        self.rank = counts[:, -1].tolist()
        if k == 2:
            # lines of [2]^n are exactly the comparable pairs of the subset order
            self.above = [0] * self.size
            for L in self.lines:
                lo, hi = _bits_of(L)
                self.above[lo] |= 1 << hi
        srt = np.sort(d, axis=1)
        rep_index = ((srt.astype(np.int64) - 1) * (k ** np.arange(n - 1, -1, -1))).sum(axis=1)
        self.orbit_rep = rep_index.tolist()
        self.orbit_reps = sorted(set(self.orbit_rep))

    def bound(self, chosen: int, cand: int) -> int:
        if self.k == 2:
            tops: list[int] = []
            for p in sorted(_bits_of(cand), key=lambda q: (self.rank[q], q)):
                for c, t in enumerate(tops):
                    if self.above[t] >> p & 1:
                        tops[c] = p
                        break
                else:
                    tops.append(p)
            return len(tops)
        # greedy disjoint line packing: each packed line loses at least one candidate
        free, saved, allowed = cand, 0, chosen | cand
        for L in self.lines:
            part = L & free
            if part and L & ~allowed == 0 and part == L & cand and part & (part - 1):
                free &= ~part
                saved += 1
        return _popcount(cand) - saved

    def include(self, p: int, chosen: int, cand: int) -> tuple[int, int]:
        chosen |= 1 << p
        cand &= ~(1 << p)
        for L in self.through[p]:
            rest = L & ~chosen
            if rest and rest & (rest - 1) == 0:
                cand &= ~rest
        return chosen, cand

    def greedy(self) -> int:
        chosen = 0
        for p in sorted(range(self.size), key=lambda q: (self.imbalance[q], q)):
            if all(L & ~chosen != 1 << p for L in self.through[p]):
                chosen |= 1 << p
        return chosen


def _bits_of(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


@functools.lru_cache(maxsize=16)
def _cube(k: int, n: int) -> _Cube:
    return _Cube(k, n)


class _Found(Exception):
    pass


def _run_branch(k: int, n: int, j: int, floor: int, stop_at_floor: bool,
                node_cap: int | None, seconds: float | None):
    """Search root branch ``j``: contains orbit rep ``j``, avoids earlier orbits.

    Returns ``(best mask or None, nodes, exhausted)``; ``best`` has size >= ``floor``.
    """
    cube = _cube(k, n)
    meter = _Meter(SearchBudget(node_cap, seconds))
    rep = cube.orbit_reps[j]
    earlier = set(cube.orbit_reps[:j])
    cand = sum(1 << q for q in range(cube.size) if cube.orbit_rep[q] not in earlier)
    chosen, cand = cube.include(rep, 0, cand)
    best = [floor - 1, None]

    def rec(chosen: int, cand: int, size: int) -> None:
        meter.tick()
        if size > best[0]:
            best[0], best[1] = size, chosen
            if stop_at_floor:
                raise _Found
        if not cand or size + cube.bound(chosen, cand) <= best[0]:
            return
        p = (cand & -cand).bit_length() - 1
        rec(*cube.include(p, chosen, cand), size + 1)
        rec(chosen, cand & ~(1 << p), size)

    try:
        rec(chosen, cand, 1)
    except _Found:
        pass
    except BudgetExhausted:
        return best[1], meter.nodes, True
    return best[1], meter.nodes, False


def _search(k: int, n: int, floor: int, stop_at_floor: bool, budget: SearchBudget | None):
    budget = budget or UNLIMITED
    cube = _cube(k, n)
    branches = range(len(cube.orbit_reps))
    args = [(k, n, j, floor, stop_at_floor, budget.nodes, budget.seconds) for j in branches]
    if budget.jobs > 1:
        with ProcessPoolExecutor(budget.jobs) as pool:
            results = list(pool.map(_run_branch, *zip(*args)))
    else:
        results = []
        spent = 0
        for a in args:
            cap = None if budget.nodes is None else budget.nodes - spent
            if cap is not None and cap <= 0:
                results.append((None, 0, True))
                break
            res = _run_branch(*a[:-2], cap, a[-1])
            spent += res[1]
            results.append(res)
            if stop_at_floor and res[0] is not None:
                break
    return results


@dataclass
class LinefreeResult:
    k: int
    n: int
    size: int
    witness: PointSet
    optimal: bool
    nodes: int = 0

    @property
    def density(self) -> Fraction:
        return Fraction(self.size, self.k ** self.n)


def _mask_to_set(k: int, n: int, mask: int) -> PointSet:
    return PointSet.from_indices(k, n, _bits_of(mask))


def max_linefree(k: int, n: int, budget: SearchBudget | None = None) -> LinefreeResult:
    """Largest subset of ``[k]^n`` containing no combinatorial line, with witness.

    The search orders points by index, prunes with a greedy cover bound and
    splits the root over orbits of coordinate permutations.  On budget
    exhaustion the greedy/best-known set is returned with ``optimal=False``.
    """
    cube = _cube(k, n)
    lb_mask = cube.greedy()
    lb = _popcount(lb_mask)
    results = _search(k, n, lb + 1, False, budget)
    best_mask, best = lb_mask, lb
    for mask, _, _ in results:  # branch order => deterministic witness
        if mask is not None and _popcount(mask) > best:
            best_mask, best = mask, _popcount(mask)
    optimal = not any(ex for _, _, ex in results) and len(results) == len(cube.orbit_reps)
    witness = _mask_to_set(k, n, best_mask)
    if find_line(witness) is not None:
        raise AssertionError("internal error: witness contains a line")
    return LinefreeResult(k, n, best, witness, optimal, sum(r[1] for r in results))


def linefree_of_size(k: int, n: int, target: int,
                     budget: SearchBudget | None = None) -> PointSet | None:
    """A line-free subset of ``[k]^n`` with at least ``target`` points, or ``None`` if none exists."""
    cube = _cube(k, n)
    if target <= 0:
        return PointSet.empty(k, n)
    greedy = cube.greedy()
    if _popcount(greedy) >= target:
        return _mask_to_set(k, n, greedy)
    results = _search(k, n, target, True, budget)
    for mask, nodes, exhausted in results:
        if mask is not None:
            return _mask_to_set(k, n, mask)
        if exhausted:
            raise BudgetExhausted(f"no decision for size {target} in [{k}]^{n}",
                                  sum(r[1] for r in results))
    if len(results) < len(cube.orbit_reps):
        raise BudgetExhausted("node cap exceeded", sum(r[1] for r in results))
    return None


# ---------------------------------------------------------------- dhj(k, delta)

def required_size(delta: Fraction, k: int, n: int) -> int:
    """Least cardinality counted as density ``>= delta`` in ``[k]^n``."""
    return math.ceil(Fraction(delta) * k ** n)


@dataclass
class HorizonResult:
    k: int
    delta: Fraction
    horizon: int
    value: int | None  # None = undetermined within the horizon
    witnesses: dict[int, PointSet] = field(default_factory=dict)
    refuted: list[int] = field(default_factory=list)  # n with no line-free set of density delta
    label: str = "horizon-verified"
    density_semantics: str = "dens(A) >= delta"

    @property
    def determined(self) -> bool:
        return self.value is not None


def dhj_value(k: int, delta: Fraction, horizon: int,
              budget: SearchBudget | None = None) -> HorizonResult:
    """Least ``N <= horizon`` such that every ``n`` in ``[N, horizon]`` forces a line."""
    delta = Fraction(delta)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    refuted: list[int] = []
    top_witness = None
    n = horizon
    while n >= 1:
        w = linefree_of_size(k, n, required_size(delta, k, n), budget)
        if w is not None:
            top_witness = w
            break
        refuted.append(n)
        n -= 1
    if n == horizon:
        return HorizonResult(k, delta, horizon, None, {horizon: top_witness}, [],
                             label="undetermined")
    value = n + 1
    witnesses = {}
    for lower in range(1, value):
        w = top_witness if lower == n else linefree_of_size(k, lower, required_size(delta, k, lower), budget)
        if w is not None:
            witnesses[lower] = w
    return HorizonResult(k, delta, horizon, value, witnesses, sorted(refuted))
