"""Constructive density-increment procedures.

Every routine runs at whatever ambient length it is handed.  When a step
that would be guaranteed at astronomically large ``n`` cannot be completed,
it raises :class:`HypothesisNotMet` naming the step and the measured
quantities.  Every claimed output is rechecked independently before return.

Sets handled by the later procedures live in ``[k+1]^n`` where ``k`` is the
base alphabet of the :class:`ProofParameters`.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from dhj.bounds import OracleTable, ProofParameters
from dhj.cube import Subspace, Word, digits, enumerate_subspaces, line_matrix
from dhj.insensitive import is_insensitive, is_insensitive_in, substitution_map
from dhj.pointset import PointSet, at_least
from dhj.search import find_dense_subspace, find_line, find_subspace, gr_partition_search
from dhj.trace import (CertificateError, Exhausted, HypothesisNotMet, Increment, LineFound,
                       ProcedureTrace)

LineOracle = Callable[[PointSet], "Subspace | None"]
SubspaceOracle = Callable[[PointSet, int], "Subspace | None"]


def _flag(p: ProofParameters | None) -> str:
    return "toy" if p is not None and p.toy else "derived"


def _letters(idx: int, k: int, n: int) -> tuple[int, ...]:
    return Word.from_index(int(idx), k, n).letters if n else ()


def _glue(*parts: Sequence[int], k: int) -> Subspace:
    syms: tuple[int, ...] = ()
    for part in parts:
        syms += tuple(part)
    return Subspace.of(k, syms)


def _ge(count: int, size: int, bound: Fraction) -> bool:
    """``count/size >= bound`` without building a Fraction."""
    return count * bound.denominator >= bound.numerator * size


# ---------------------------------------------------------------- uniformisation

def uniformize(A: PointSet, m: int, eps: Fraction,
               trace: ProcedureTrace | None = None) -> tuple[int, Subspace, ProcedureTrace]:
    """Find a block ``V`` (an m-dim subspace of ``[k]^l``) over which every slice stays dense.

    Returns ``(l, V, trace)`` with ``dens(A_x) >= dens(A) - eps`` for all ``x`` in ``V``.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if m < 1:
        raise ValueError("m must be >= 1")
    k, n = A.k, A.n
    tr = trace or ProcedureTrace("uniformize")
    dens = A.density()
    rho = eps / (k ** m - 1)
    cap = int(1 / rho) + 1
    target = dens - eps
    tr.params.update(k=k, n=n, m=m, eps=eps, density=dens, rho=rho, round_cap=cap)
    if m >= n:
        tr.outcome = "exhausted"
        raise Exhausted("uniformize", f"block of length {m} leaves no room in length {n}", tr,
                        l=m, n=n)
    ident = tuple(range(-1, -m - 1, -1))
    if dens <= eps:
        V = Subspace.of(k, ident)
        tr.round(prefix="", accepted=True, reason="target bound is not positive")
        tr.outcome = "uniform"
        return m, V, tr

    prefix: tuple[int, ...] = ()
    for r in range(1, cap + 1):
        l = len(prefix) + m
        if l >= n:
            tr.outcome = "exhausted"
            raise Exhausted("uniformize", f"round {r} needs l={l} >= n={n}", tr, l=l, n=n,
                            rounds=r - 1)
        base = (Word(k, prefix).index if prefix else 0) * k ** m
        counts = A.slice_counts(l)[base:base + k ** m]
        fibre = k ** (n - l)
        low = [j for j, c in enumerate(counts) if not _ge(int(c), fibre, target)]
        info = tr.round(prefix="".join(map(str, prefix)), l=l,
                        min_slice=Fraction(int(counts.min()), fibre),
                        mean_slice=Fraction(int(counts.sum()), fibre * k ** m))
        if not low:
            V = Subspace.of(k, prefix + ident)
            info["accepted"] = True
            for x in V.indices():
                c = int(A.slice_counts(l)[x])
                tr.certify("slice density", _ge(c, fibre, target))
            tr.outcome = "uniform"
            return l, V, tr
        step = dens + r * rho
        up = [j for j, c in enumerate(counts) if _ge(int(c), fibre, step)]
        tr.certify("heavier slice exists", bool(up), round=r, needed=step)
        x = _letters(base + up[0], k, l)
        info.update(accepted=False, chosen="".join(map(str, x)),
                    chosen_density=Fraction(int(counts[up[0]]), fibre), threshold=step)
        prefix = x
    raise CertificateError(f"uniformize did not settle within {cap} rounds")


# ---------------------------------------------------------------- subspace lifts

def multidim_lift(A: PointSet, m: int, line_oracle: LineOracle = find_line,
                  block_lengths: Sequence[int] | None = None, table: OracleTable | None = None,
                  delta: Fraction | None = None, trace: ProcedureTrace | None = None) -> Subspace:
    """Build an m-dim subspace inside ``A`` by slicing, voting on a common line and recursing.

    ``block_lengths`` gives the suffix length used at each level ``m, m-1, ..., 2``;
    without it the length is read from ``table`` as ``dhj(k, delta/2)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    k, n = A.k, A.n
    delta = A.density() if delta is None else Fraction(delta)
    tr = trace or ProcedureTrace("multidim_lift")
    tr.params.update(k=k, n=n, m=m, delta=delta)
    if m == 1:
        ell = line_oracle(A)
        tr.round(level=1, line=ell)
        if ell is None:
            tr.outcome = "exhausted"
            raise Exhausted("line", "no line inside the set", tr, n=n, density=A.density())
        tr.certify("line inside set", A.contains_all(ell.indices()))
        tr.outcome = "found"
        return ell

    if block_lengths:
        M, rest = int(block_lengths[0]), list(block_lengths[1:])
    elif table is not None:
        M, rest = table.dhj(k, delta / 2), None
    else:
        raise ValueError("block length must be supplied (block_lengths or an oracle table)")
    if not 1 <= M < n:
        tr.outcome = "exhausted"
        raise Exhausted("split", f"block length {M} needs 1 <= M < n={n}", tr, M=M, n=n)

    grid = A.bits.reshape(k ** (n - M), k ** M)
    counts = grid.sum(axis=1)
    half = delta / 2
    B = np.flatnonzero(at_least(counts, k ** M, half))
    if A.density() >= delta:
        tr.certify("dense slices", _ge(len(B), k ** (n - M), half))
    votes: Counter = Counter()
    cache: dict[bytes, Subspace | None] = {}
    for x in B:
        key = grid[x].tobytes()
        if key not in cache:
            cache[key] = line_oracle(PointSet(k, M, grid[x]))
        if cache[key] is not None:
            votes[cache[key]] += 1
    if not votes:
        tr.outcome = "exhausted"
        raise Exhausted("vote", "no dense slice contains a line", tr, dense_slices=len(B))
    top = max(votes.values())
    ell = min((L for L, c in votes.items() if c == top), key=lambda L: L.lex_key())
    members = grid[B][:, ell.indices()].all(axis=1)
    C = PointSet.from_indices(k, n - M, B[members])
    nxt = half / (k + 1) ** M
    tr.round(level=m, M=M, dense_slices=len(B), voters=sum(votes.values()), line=ell,
             votes=top, common=len(C), common_density=C.density(), next_delta=nxt)
    sub = tr.child(ProcedureTrace("multidim_lift", flag=tr.flag))
    W = multidim_lift(C, m - 1, line_oracle, rest, table, nxt, sub)
    tail = tuple(-m if s < 0 else s for s in ell.generator.symbols)
    V = Subspace.of(k, W.generator.symbols + tail)
    tr.certify("subspace inside set", A.contains_all(V.indices()), subspace=V)
    tr.outcome = "found"
    return V


def restricted_lift(A: PointSet, m: int, M: int | None = None, table: OracleTable | None = None,
                    delta: Fraction | None = None, subspace_oracle: SubspaceOracle | None = None,
                    trace: ProcedureTrace | None = None) -> Subspace:
    """Find an m-dim ``V`` of ``[k+1]^n`` with ``V|k`` inside ``A`` via a uniform block of dim ``M``."""
    K, n = A.k, A.n
    if K < 3:
        raise ValueError("restricted lift needs an ambient alphabet of size >= 3")
    if m < 1:
        raise ValueError("m must be >= 1")
    k = K - 1
    tr = trace or ProcedureTrace("restricted_lift")
    delta = A.density() if delta is None else Fraction(delta)
    if delta <= 0:
        tr.outcome = "exhausted"
        raise Exhausted("density", "the set is empty", tr)
    if M is None:
        if table is None:
            raise ValueError("block dimension M must be supplied (M or an oracle table)")
        M = table.get(("mdhj", k, m, delta / 2))
    tr.params.update(k=k, n=n, m=m, M=M, delta=delta)
    oracle = subspace_oracle or find_subspace
    try:
        l, W, _ = uniformize(A, M, delta / 2, tr.child(ProcedureTrace("uniformize", flag=tr.flag)))
    except HypothesisNotMet as e:
        tr.outcome = "exhausted"
        raise Exhausted("uniformize", e.reason, tr, **e.measured) from None
    Z = W.indices(k)
    grid = A.bits.reshape(K ** l, K ** (n - l))
    fibres = grid[Z].sum(axis=0)
    y0 = int(np.argmax(fibres))
    if A.density() >= delta:
        tr.certify("dense fibre", _ge(int(fibres[y0]), len(Z), delta / 2))
    model = PointSet(k, M, grid[Z, y0])
    tail = _letters(y0, K, n - l)
    tr.round(block=W, l=l, fibre="".join(map(str, tail)),
             fibre_density=Fraction(int(fibres[y0]), len(Z)))
    inner = oracle(model, m)
    if inner is None:
        tr.outcome = "exhausted"
        raise Exhausted("model", "no subspace inside the dense fibre", tr,
                        fibre_density=model.density())
    V = _glue(W.compose(inner.lift(K)).generator.symbols, tail, k=K)
    tr.certify("restriction inside set", A.contains_all(V.indices(k)), subspace=V)
    tr.outcome = "found"
    return V


# ---------------------------------------------------------------- uniform lines

def _slice_grid(A: PointSet, l: int) -> np.ndarray:
    return A.bits.reshape(A.k ** l, A.k ** (A.n - l))


def _line_points(U: Subspace, k: int) -> np.ndarray:
    """Rows: lines of ``U|k`` (in the order of lines of ``[k]^dim``); columns: ambient points."""
    lines, mat = line_matrix(k, U.dim)
    return U.indices(k)[mat]


def extract_uniform_lines(A: PointSet, m: int, p: ProofParameters,
                          gr_dim: int | None = None, gr_oracle=gr_partition_search,
                          line_oracle: LineOracle = find_line,
                          trace: ProcedureTrace | None = None) -> tuple[int, Subspace, ProcedureTrace]:
    """Find ``U`` in ``[k+1]^l`` with dense slices over ``U`` and dense slice intersections on lines of ``U|k``."""
    K, n, k = A.k, A.n, p.k
    if K != k + 1:
        raise ValueError(f"set lives over [{K}], parameters expect [{k + 1}]")
    if m < p.m0:
        raise ValueError(f"m={m} below m0={p.m0}")
    G = gr_dim if gr_dim is not None else p.gr_dim
    if G is None:
        raise ValueError("partition block dimension must be supplied (gr_dim)")
    tr = trace or ProcedureTrace("extract_uniform_lines", flag=_flag(p))
    eps = p.eta ** 2 / 2
    tr.params.update(k=k, n=n, m=m, G=G, eps=eps, theta=p.theta, delta=p.delta)
    dens = A.density()
    if dens < p.delta or dens <= eps:
        tr.outcome = "hypothesis_not_met"
        raise HypothesisNotMet("uniformize", "set too sparse", tr, density=dens, delta=p.delta)
    try:
        l, V, _ = uniformize(A, G, eps, tr.child(ProcedureTrace("uniformize", flag=tr.flag)))
    except HypothesisNotMet as e:
        tr.outcome = "hypothesis_not_met"
        raise HypothesisNotMet("uniformize", e.reason, tr, **e.measured) from None
    grid = _slice_grid(A, l)
    lines, mat = line_matrix(k, G)
    pts = V.indices(k)[mat]
    fibre = K ** (n - l)
    common = np.logical_and.reduce(grid[pts], axis=1).sum(axis=1)
    marked = [L for L, c in zip(lines, common) if _ge(int(c), fibre, p.theta)]
    tr.round(block=V, l=l, lines=len(lines), marked=len(marked))
    res = gr_oracle(marked, m, k, G)
    if res is None:
        tr.outcome = "hypothesis_not_met"
        raise HypothesisNotMet("gr", f"no {m}-dim subspace of [{k}]^{G} is monochromatic", tr,
                               G=G, marked=len(marked), lines=len(lines))
    Y = res.subspace
    tr.round(subspace=Y, contained=res.contained)
    if not res.contained:
        _reject_disjoint(A, l, V, Y, p, line_oracle, tr)
    U = V.compose(Y.lift(K))
    for u in U.indices():
        tr.certify("(a) slice density", _ge(int(grid[u].sum()), fibre, p.delta - eps))
    upts = _line_points(U, k)
    inter = np.logical_and.reduce(grid[upts], axis=1).sum(axis=1)
    tr.certify("(b) line intersections", all(_ge(int(c), fibre, p.theta) for c in inter),
               min_intersection=Fraction(int(inter.min()), fibre))
    tr.outcome = "uniform_lines"
    return l, U, tr


def _reject_disjoint(A, l, V, Y, p, line_oracle, tr) -> None:
    """Counting vote over an m0-dim ``Z`` inside ``Y``; at desk scale it reports the shortfall."""
    K, n, k = A.k, A.n, p.k
    Z0 = next(iter(enumerate_subspaces(k, Y.dim, p.m0)))
    Z = V.compose(Y.compose(Z0).lift(K))
    grid = _slice_grid(A, l)
    zpts = Z.indices(k)
    fib = grid[zpts]
    quarter = p.delta / 4
    counts = fib.sum(axis=0)
    B = np.flatnonzero(at_least(counts, len(zpts), quarter))
    votes: Counter = Counter()
    for y in B:
        ell = line_oracle(PointSet(k, p.m0, fib[:, y]))
        if ell is not None:
            votes[ell] += 1
    share = Fraction(0)
    best = None
    if votes:
        top = max(votes.values())
        best = min((L for L, c in votes.items() if c == top), key=lambda L: L.lex_key())
        hits = fib[best.indices()][:, B].all(axis=0)
        share = Fraction(int(hits.sum()), K ** (n - l))
    tr.round(vote_block=Z, dense_fibres=len(B), line=best, common_density=share)
    tr.certify("disjoint colour consistent", share < p.theta, common_density=share)
    tr.outcome = "hypothesis_not_met"
    raise HypothesisNotMet("gr-disjoint", "counting vote falls short of theta", tr,
                           common_density=share, theta=p.theta, dense_fibres=len(B))


# ---------------------------------------------------------------- line-rich fibre

@dataclass
class LineRich:
    subspace: Subspace
    density: Fraction
    rich_lines: int
    trace: ProcedureTrace
    tag = "line_rich"


def line_dichotomy(A: PointSet, m: int, p: ProofParameters, gr_dim: int | None = None,
                   gr_oracle=gr_partition_search, trace: ProcedureTrace | None = None):
    """Either a dense m-dim ``X`` (:class:`Increment`) or an m-dim ``W`` whose ``W|k`` holds many lines of ``A``."""
    K, n, k = A.k, A.n, p.k
    tr = trace or ProcedureTrace("line_dichotomy", flag=_flag(p))
    tr.params.update(p.as_dict(), n=n, m=m)
    bump = p.delta + p.eta ** 2 / 2
    hit = find_dense_subspace(A, m, bump)
    if hit is not None:
        X, d = hit
        tr.certify("increment density", A.density_in(X) == d and d >= bump, density=d)
        tr.outcome = "increment"
        return Increment(X, d, tr)
    l, U, _ = extract_uniform_lines(A, m, p, gr_dim, gr_oracle,
                                    trace=tr.child(ProcedureTrace("extract_uniform_lines",
                                                                  flag=tr.flag)))
    (tr.certify if not p.toy else tr.note)("eta < theta/2", p.eta < p.theta / 2)
    grid = _slice_grid(A, l)
    Upts = U.indices()
    per_y = grid[Upts].sum(axis=0)
    floor = p.delta - 2 * p.eta
    H1 = at_least(per_y, len(Upts), floor)
    lpts = _line_points(U, k)
    nlines = lpts.shape[0]
    Ly = np.logical_and.reduce(grid[lpts], axis=1).sum(axis=0)
    half = p.theta / 2
    H2 = at_least(Ly, nlines, half)
    both = np.flatnonzero(H1 & H2)
    tr.round(l=l, base=U, H1=int(H1.sum()), H2=int(H2.sum()), fibres=K ** (n - l))
    if both.size == 0:
        tr.outcome = "hypothesis_not_met"
        raise HypothesisNotMet("fibre", "no fibre is both dense and line-rich", tr,
                               H1=int(H1.sum()), H2=int(H2.sum()))
    y0 = int(both[0])
    W = _glue(U.generator.symbols, _letters(y0, K, n - l), k=K)
    dW = A.density_in(W)
    tr.certify("fibre density", dW >= floor, density=dW)
    _, wl = line_matrix(k, m)
    rich = int(A.bits[W.indices(k)[wl]].all(axis=1).sum())
    tr.certify("line-rich", rich * half.denominator >= half.numerator * wl.shape[0] and
               rich == int(Ly[y0]), rich=rich, lines=wl.shape[0])
    tr.outcome = "line_rich"
    return LineRich(W, dW, rich, tr)


def line_rich_at(A: PointSet, W: Subspace, p: ProofParameters,
                 trace: ProcedureTrace | None = None) -> LineRich:
    """Check a caller-chosen m-dim ``W`` against the line-rich fibre conditions."""
    K, k = A.k, p.k
    tr = trace or ProcedureTrace("line_rich_at", flag=_flag(p))
    tr.params.update(p.as_dict(), n=A.n, m=W.dim, W=W)
    bump = p.delta + p.eta ** 2 / 2
    hit = find_dense_subspace(A, W.dim, bump)
    if hit is not None:
        tr.outcome = "increment"
        return Increment(hit[0], hit[1], tr)
    dW = A.density_in(W)
    _, wl = line_matrix(k, W.dim)
    rich = int(A.bits[W.indices(k)[wl]].all(axis=1).sum())
    tr.require("line_rich", "fibre density", dW >= p.delta - 2 * p.eta, density=dW)
    half = p.theta / 2
    tr.require("line_rich", "line-rich", rich * half.denominator >= half.numerator * wl.shape[0],
               rich=rich, lines=wl.shape[0])
    tr.outcome = "line_rich"
    return LineRich(W, dW, rich, tr)


# ---------------------------------------------------------------- structured set

@dataclass
class Structured:
    subspace: Subspace
    parts: list[PointSet]  # C_1..C_k as subsets of the model cube [k+1]^m
    core: PointSet  # C
    trace: ProcedureTrace = field(repr=False, default=None)
    tag = "structured"


def _lower_mask(K: int, m: int) -> np.ndarray:
    return (digits(K, m) < K).all(axis=1)


def structured_set(A: PointSet, m: int, p: ProofParameters, gr_dim: int | None = None,
                   gr_oracle=gr_partition_search, trace: ProcedureTrace | None = None,
                   line_finder=None):
    """Find ``W`` and ``C = C_1 ∩ ... ∩ C_k`` with each ``C_i`` (i,k+1)-insensitive in ``W``.

    ``line_finder(A, m, p, trace)`` supplies the line-rich ``W`` (default: :func:`line_dichotomy`).
    """
    K, n, k = A.k, A.n, p.k
    if m < p.M0:
        raise ValueError(f"m={m} below M0={p.M0}")
    tr = trace or ProcedureTrace("structured_set", flag=_flag(p))
    tr.params.update(k=k, n=n, m=m)
    ell = find_line(A)
    if ell is not None:
        tr.outcome = "line_found"
        return LineFound(ell, tr)
    sub = tr.child(ProcedureTrace("line_dichotomy", flag=tr.flag))
    if line_finder is None:
        got = line_dichotomy(A, m, p, gr_dim, gr_oracle, sub)
    else:
        got = line_finder(A, m, p, sub)
    if isinstance(got, Increment):
        tr.outcome = "increment"
        return got
    W = got.subspace
    if W.dim != m or (W.k, W.n) != (K, n):
        raise ValueError(f"line-rich subspace {W} is not {m}-dimensional in [{K}]^{n}")
    AW = A.pullback(W)
    low = AW.bits & _lower_mask(K, m)
    parts = [PointSet(K, m, low[substitution_map(K, m, K, i)]) for i in range(1, k + 1)]
    C = parts[0]
    for Ci in parts[1:]:
        C = C & Ci
    for i, Ci in enumerate(parts, 1):
        tr.certify(f"C_{i} insensitive", is_insensitive(Ci, (i, K)) and
                   is_insensitive_in(Ci.pushforward(W), W, (i, K)))
    # B: top points of lines of W|k lying in A, read in the model cube
    lines, mat = line_matrix(k, m)
    inside = AW.bits[Subspace.identity(K, m).indices(k)[mat]].all(axis=1)
    tops = [L.lift(K).generator.instantiate((K,)).index for L, ok in zip(lines, inside) if ok]
    B = PointSet.from_indices(K, m, tops)
    tr.certify("C = B ∪ (A ∩ W|k)", C == (B | PointSet(K, m, low)))
    tr.certify("A ∩ C inside W|k", not np.any(AW.bits & C.bits & ~_lower_mask(K, m)))
    dAC = (AW & C).density()
    lam_m = p.lam ** -m
    tr.certify("dens(A ∩ C) <= lambda^-m", dAC <= lam_m, value=dAC, bound=lam_m)
    (tr.certify if not p.toy else tr.note)("lambda^-m <= eta", lam_m <= p.eta)
    dC = C.density()
    outside = ~C
    dO = outside.density()
    dAO = (AW & outside).density()
    tr.round(W=W, C=dC, outside=dO, A_outside=dAO)
    tr.require("structured_set", "(a) dens(C) >= theta/4", dC >= p.theta / 4,
               value=dC, bound=p.theta / 4)
    tr.require("structured_set", "(b) relative density outside C",
               dAO >= (p.delta + 6 * p.eta) * dO, value=dAO, bound=(p.delta + 6 * p.eta) * dO)
    tr.require("structured_set", "(b) absolute density outside C",
               dAO >= p.delta - 3 * p.eta, value=dAO, bound=p.delta - 3 * p.eta)
    tr.outcome = "structured"
    return Structured(W, parts, C, tr)


# ---------------------------------------------------------------- correlation

@dataclass
class Correlation:
    subspace: Subspace
    parts: list[PointSet]  # D_1..D_k in the model cube [k+1]^m
    early: bool
    trace: ProcedureTrace = field(repr=False, default=None)
    partition: list[PointSet] = field(default_factory=list)  # P_1..P_k, empty on the early branch
    outside: PointSet | None = None  # W minus C, the set the partition covers
    tag = "correlated"

    @property
    def core(self) -> PointSet:
        D = self.parts[0]
        for Di in self.parts[1:]:
            D = D & Di
        return D


def correlate(A: PointSet, m: int, p: ProofParameters, gr_dim: int | None = None,
              gr_oracle=gr_partition_search, trace: ProcedureTrace | None = None,
              line_finder=None):
    """Find ``W`` and insensitive ``D_1..D_k`` whose intersection carries a density bump for ``A``."""
    K, n, k = A.k, A.n, p.k
    if m < p.M0:
        raise ValueError(f"m={m} below M0={p.M0}")
    tr = trace or ProcedureTrace("correlate", flag=_flag(p))
    tr.params.update(p.as_dict(), n=n, m=m)
    ell = find_line(A)
    if ell is not None:
        tr.outcome = "line_found"
        return LineFound(ell, tr)
    (tr.certify if not p.toy else tr.note)("eta^2/2 >= gamma", p.eta ** 2 / 2 >= p.gamma)
    hit = find_dense_subspace(A, m, p.delta + p.eta ** 2 / 2)
    if hit is not None:
        W = hit[0]
        parts = [PointSet.full(K, m) for _ in range(k)]
        out = Correlation(W, parts, True, tr)
        tr.round(branch="early", W=W, density=hit[1])
    else:
        st = structured_set(A, m, p, gr_dim, gr_oracle,
                            tr.child(ProcedureTrace("structured_set", flag=tr.flag)), line_finder)
        if not isinstance(st, Structured):
            tr.outcome = st.tag
            return st
        W, Cs = st.subspace, st.parts
        AW = A.pullback(W)
        P, rest = [], PointSet.full(K, m)
        for Ci in Cs:
            P.append(rest - Ci)
            rest = rest & Ci
        outside = ~st.core
        union = PointSet.empty(K, m)
        for i, Pi in enumerate(P):
            for Pj in P[i + 1:]:
                tr.certify("parts disjoint", not np.any(Pi.bits & Pj.bits))
            union = union | Pi
        tr.certify("parts cover W \\ C", union == outside)
        dO = outside.density()
        lam = [Pi.density() / dO for Pi in P]
        dlt = [(AW & Pi).density() / Pi.density() if len(Pi) else Fraction(0) for Pi in P]
        total = sum(a * b for a, b in zip(lam, dlt))
        tr.certify("weighted identity", total == (AW & outside).density() / dO, total=total)
        tr.certify("weighted average", total >= p.delta + 6 * p.eta, total=total)
        tr.round(branch="partition", W=W, lambdas=lam, deltas=dlt)
        pick = [i for i in range(k) if lam[i] >= 3 * p.eta / k and dlt[i] >= p.delta + 3 * p.eta]
        tr.certify("selectable part", bool(pick))
        i0 = pick[0]
        parts = [Cs[i] if i < i0 else (~Cs[i] if i == i0 else PointSet.full(K, m))
                 for i in range(k)]
        out = Correlation(W, parts, False, tr, P, outside)
        tr.certify("D equals selected part", out.core == P[i0], i0=i0 + 1)
        tr.rounds[-1]["i0"] = i0 + 1
    for i, Di in enumerate(out.parts, 1):
        tr.certify(f"D_{i} insensitive", is_insensitive(Di, (i, K)))
    D = out.core
    AD = A.pullback(out.subspace) & D
    tr.require("correlate", "dens(D) >= gamma", D.density() >= p.gamma,
               value=D.density(), bound=p.gamma)
    tr.require("correlate", "dens(A ∩ D) >= (delta+gamma) dens(D)",
               AD.density() >= (p.delta + p.gamma) * D.density(),
               value=AD.density(), bound=(p.delta + p.gamma) * D.density())
    tr.outcome = "correlated"
    return out
