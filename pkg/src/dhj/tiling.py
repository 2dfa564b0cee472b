"""Tiling insensitive sets (and intersections of them) by disjoint subspaces."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from dhj.cube import Subspace, Word
from dhj.insensitive import class_representatives, is_insensitive
from dhj.pointset import PointSet, at_least
from dhj.search import find_restricted_subspace
from dhj.trace import HypothesisNotMet, ProcedureTrace


@dataclass(frozen=True)
class TilingParameters:
    """Block width ``M1`` and member dimension ``m`` for tiling subsets of ``[k+1]^n``."""

    k: int
    beta: Fraction
    m: int
    M1: int
    toy: bool = True

    def __post_init__(self):
        object.__setattr__(self, "beta", Fraction(self.beta))
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.m < 1 or self.M1 < self.m:
            raise ValueError(f"need 1 <= m <= M1, got m={self.m}, M1={self.M1}")
        if not 0 < self.theta < 1:
            raise ValueError(f"per-round gain {self.theta} outside (0, 1)")

    @property
    def theta(self) -> Fraction:
        K = self.k + 1
        return self.beta * Fraction(K ** self.m, (K + self.m) ** self.M1 * K ** self.M1)

    @property
    def round_cap(self) -> int:
        return int(1 / self.theta)

    def as_dict(self) -> dict:
        return {"k": self.k, "beta": self.beta, "m": self.m, "M1": self.M1, "Theta": self.theta,
                "flag": "toy" if self.toy else "derived"}


@dataclass
class Tiling:
    members: list[Subspace]
    covered: PointSet
    residual: Fraction
    rounds: int
    trace: ProcedureTrace = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.members)


def check_tiling(D: PointSet, members: Sequence[Subspace], m: int) -> PointSet:
    """Recheck members are m-dim, inside ``D`` and pairwise disjoint; return their union."""
    hits = np.zeros(D.size, dtype=np.int64)
    for V in members:
        if V.dim != m or (V.k, V.n) != (D.k, D.n):
            raise AssertionError(f"{V} is not an {m}-dim subspace of [{D.k}]^{D.n}")
        idx = V.indices()
        if not D.contains_all(idx):
            raise AssertionError(f"{V} leaves the set")
        np.add.at(hits, idx, 1)
    if hits.max(initial=0) > 1:
        raise AssertionError("members overlap")
    return PointSet(D.k, D.n, hits > 0)


def _insensitive_columns(grid: np.ndarray, rep: np.ndarray) -> bool:
    """Every column of ``grid`` (a set indexed by rows) is closed under the class map ``rep``."""
    return bool(np.array_equal(grid[rep], grid))


def tile_insensitive(D: PointSet, i: int, t: TilingParameters,
                     oracle: Callable[[PointSet, int], Subspace | None] = find_restricted_subspace,
                     trace: ProcedureTrace | None = None) -> Tiling:
    """Cover an (i,k+1)-insensitive ``D`` by disjoint m-dim subspaces up to residual density ``< 2 beta``."""
    K, n = D.k, D.n
    if K != t.k + 1:
        raise ValueError(f"set lives over [{K}], tiling expects [{t.k + 1}]")
    if not 1 <= i <= t.k:
        raise ValueError(f"letter {i} out of range 1..{t.k}")
    if not is_insensitive(D, (i, K)):
        raise ValueError(f"set is not ({i},{K})-insensitive")
    tr = trace or ProcedureTrace("tile_insensitive", flag="toy" if t.toy else "derived")
    tr.params.update(t.as_dict(), n=n, letter=i, density=D.density())
    two_beta = 2 * t.beta
    members: list[Subspace] = []
    left = D.bits.copy()
    if D.density() < two_beta:
        tr.outcome = "below_threshold"
        return Tiling(members, PointSet.empty(K, n), D.density(), 0, tr)

    M1, size = t.M1, K ** n
    rep_block = class_representatives(K, M1, (i, K))
    cache: dict[bytes, Subspace | None] = {}
    r = 0
    while Fraction(int(left.sum()), size) >= two_beta:
        r += 1
        if r * M1 > n:
            tr.outcome = "hypothesis_not_met"
            raise HypothesisNotMet("tile", f"round {r} needs length {r * M1} > n={n}", tr,
                                   rounds=r - 1, residual=Fraction(int(left.sum()), size))
        tail = (r - 1) * M1
        head = n - r * M1
        if r > 1:
            rep_head = class_representatives(K, n - tail, (i, K))
            tr.certify("remainder fibres insensitive",
                       _insensitive_columns(left.reshape(K ** (n - tail), K ** tail), rep_head))
        cube = left.reshape(K ** head, K ** M1, K ** tail)
        tr.certify("block fibres insensitive", np.array_equal(cube[:, rep_block, :], cube))
        counts = cube.sum(axis=1)
        dense = np.argwhere(at_least(counts, K ** M1, t.beta))
        votes: Counter = Counter()
        for x, y in dense:
            fib = cube[x, :, y]
            key = fib.tobytes()
            if key not in cache:
                cache[key] = oracle(PointSet(K, M1, fib), t.m)
            if cache[key] is not None:
                votes[cache[key]] += 1
        if not votes:
            tr.outcome = "hypothesis_not_met"
            raise HypothesisNotMet("tile", "no dense fibre holds a restricted subspace", tr,
                                   round=r, dense_fibres=len(dense))
        top = max(votes.values())
        V = min((W for W, c in votes.items() if c == top), key=lambda W: W.lex_key())
        vidx = V.indices()
        S = np.argwhere(cube[:, vidx, :].all(axis=1))
        gain = Fraction(len(S) * K ** t.m, size)
        before = Fraction(int(D.bits.sum() - left.sum()), size)
        for x, y in S:
            syms = (Word.from_index(int(x), K, head).letters if head else ()) + V.generator.symbols \
                + (Word.from_index(int(y), K, tail).letters if tail else ())
            W = Subspace.of(K, syms)
            members.append(W)
            left[W.indices()] = False
        tr.round(block=V, dense_fibres=len(dense), votes=top, placed=len(S), gain=gain,
                 covered_before=before, covered_after=before + gain)
        tr.require("tile", "per-round gain >= Theta", gain >= t.theta, round=r, gain=gain,
                   bound=t.theta)
    tr.certify("round count <= 1/Theta", r <= t.round_cap, rounds=r, cap=t.round_cap)
    covered = check_tiling(D, members, t.m)
    residual = (D - covered).density()
    tr.certify("remainder matches", np.array_equal((D - covered).bits, left))
    tr.certify("residual < 2 beta", residual < two_beta, residual=residual)
    tr.outcome = "tiled"
    return Tiling(members, covered, residual, r, tr)


def tile_intersection(Ds: Sequence[PointSet], schedule: Sequence[TilingParameters],
                      oracle: Callable[[PointSet, int], Subspace | None] = find_restricted_subspace,
                      trace: ProcedureTrace | None = None) -> Tiling:
    """Tile ``D_1 ∩ ... ∩ D_r`` where ``D_i`` is (i,k+1)-insensitive.

    ``schedule[j]`` tiles at level ``j+1``; level ``j+1`` refines each level-``j``
    member, so ``schedule[j].M1 <= schedule[j-1].m``.  The result has dimension
    ``schedule[-1].m``.
    """
    r = len(Ds)
    if r < 1 or len(schedule) != r:
        raise ValueError("need one tiling schedule entry per set")
    betas = {s.beta for s in schedule}
    if len(betas) != 1:
        raise ValueError("all levels must share beta")
    tr = trace or ProcedureTrace("tile_intersection",
                                 flag="toy" if any(s.toy for s in schedule) else "derived")
    if r == 1:
        tr.params.update(levels=1)
        return tile_insensitive(Ds[0], 1, schedule[0], oracle, tr)
    t = schedule[-1]
    K, n = Ds[0].k, Ds[0].n
    tr.params.update(levels=r, final=t.as_dict())
    outer = tile_intersection(Ds[:-1], schedule[:-1], oracle,
                              tr.child(ProcedureTrace("tile_intersection", flag=tr.flag)))
    last = Ds[-1]
    if not is_insensitive(last, (r, K)):
        raise ValueError(f"set {r} is not ({r},{K})-insensitive")
    members: list[Subspace] = []
    kept = 0
    for V in outer.members:
        if last.density_in(V) < 2 * t.beta:
            continue
        kept += 1
        inner = tile_insensitive(last.pullback(V), r, t, oracle,
                                 tr.child(ProcedureTrace("tile_insensitive", flag=tr.flag)))
        members.extend(V.compose(W) for W in inner.members)
    D = Ds[0]
    for Di in Ds[1:]:
        D = D & Di
    covered = check_tiling(D, members, t.m)
    residual = (D - covered).density()
    tr.round(outer_members=len(outer.members), refined=kept, members=len(members))
    tr.certify("residual < 2 r beta", residual < 2 * r * t.beta, residual=residual)
    tr.outcome = "tiled"
    return Tiling(members, covered, residual, outer.rounds, tr)
