"""One dichotomy step (line or density bump) and the iteration built on it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from dhj.bounds import (MissingOracleValue, OracleTable, ProofParameters, F_of, base_params,
                        mdhj_star_bound, toy_parameters)
from dhj.cube import Subspace
from dhj.engine import Correlation, correlate
from dhj.pointset import PointSet
from dhj.search import find_line, gr_partition_search
from dhj.tiling import TilingParameters, tile_intersection
from dhj.trace import (DichotomyOutcome, HypothesisNotMet, Increment, LineFound, NotMet,
                       ProcedureTrace)


# ---------------------------------------------------------------- plans

@dataclass(frozen=True)
class ToyPlan:
    """Desk-scale overrides.  Parameters are rebuilt from the measured density each round.

    ``dims`` are member dimensions of the outer tiling levels (``k - 1`` of them,
    outermost first); the innermost level always tiles at dimension ``d``.
    ``M1`` gives the block width of every level (``k`` entries).
    """

    m_d: int = 1
    M1: tuple[int, ...] = ()
    dims: tuple[int, ...] = ()
    m0: int = 1
    M0: int | None = None
    gr_dim: int = 1
    theta: Fraction | None = None
    eta: Fraction | None = None
    gamma: Fraction | None = None
    beta: Fraction | None = None

    def params(self, k: int, delta: Fraction) -> ProofParameters:
        return toy_parameters(k, delta, m0=self.m0, theta=self.theta, eta=self.eta,
                              gamma=self.gamma, M0=self.M0, gr_dim=self.gr_dim)

    def working_dim(self, k: int, d: int, p: ProofParameters) -> int:
        return self.m_d

    def schedule(self, k: int, d: int, p: ProofParameters) -> list[TilingParameters]:
        if len(self.M1) != k or len(self.dims) != k - 1:
            raise ValueError(f"toy plan needs {k} block widths and {k - 1} outer dimensions")
        beta = p.beta if self.beta is None else Fraction(self.beta)
        dims = list(self.dims) + [d]
        return [TilingParameters(k, beta, m, M1) for m, M1 in zip(dims, self.M1)]

    @classmethod
    def from_dict(cls, data: dict) -> "ToyPlan":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown toy parameter(s): {', '.join(sorted(extra))}")
        out = dict(data)
        for name in ("theta", "eta", "gamma", "beta"):
            if out.get(name) is not None:
                out[name] = Fraction(str(out[name]))
        for name in ("M1", "dims"):
            if name in out:
                out[name] = tuple(int(v) for v in out[name])
        return cls(**out)


@dataclass(frozen=True)
class TablePlan:
    """Parameters derived from oracle values; sizes are the true (astronomical) ones."""

    table: OracleTable

    def params(self, k: int, delta: Fraction) -> ProofParameters:
        return base_params(k, delta, self.table)

    #: block widths beyond this are reported as out of scale instead of expanded
    max_width = 4096

    def _width(self, k: int, m: int, beta: Fraction) -> int:
        M1 = mdhj_star_bound(k, m, beta, self.table)
        if M1 > self.max_width:
            raise OverflowError(f"block width mdhj*({k}, {m}, beta) = {M1} is beyond desk scale")
        return M1

    def _dims(self, k: int, d: int, beta: Fraction) -> list[int]:
        dims = [d]
        for _ in range(k - 1):
            self._width(k, dims[0], beta)
            dims.insert(0, F_of(dims[0], beta, k, self.table))
        return dims

    def working_dim(self, k: int, d: int, p: ProofParameters) -> int:
        outer = self._dims(k, d, p.beta)[0]
        self._width(k, outer, p.beta)
        return max(p.M0, F_of(outer, p.beta, k, self.table))

    def schedule(self, k: int, d: int, p: ProofParameters) -> list[TilingParameters]:
        return [TilingParameters(k, p.beta, m, self._width(k, m, p.beta), toy=False)
                for m in self._dims(k, d, p.beta)]

    def gr_dim(self, k: int, m_d: int) -> int:
        return self.table.gr(k, m_d)


# ---------------------------------------------------------------- one step

def dichotomy_step(A: PointSet, d: int, p: ProofParameters, schedule: Sequence[TilingParameters],
                   m_d: int, gr_dim: int | None = None, gr_oracle=gr_partition_search,
                   trace: ProcedureTrace | None = None) -> DichotomyOutcome:
    """Return a line of ``A``, a d-dim ``V`` with ``dens_V(A) >= delta + gamma/2``, or the failing stage."""
    K, n, k = A.k, A.n, p.k
    if K != k + 1:
        raise ValueError(f"set lives over [{K}], parameters expect [{k + 1}]")
    if d < 1:
        raise ValueError("d must be >= 1")
    if A.density() < p.delta:
        raise ValueError(f"density {A.density()} below delta={p.delta}")
    flag = "toy" if p.toy or any(t.toy for t in schedule) else "derived"
    tr = trace or ProcedureTrace("dichotomy_step", flag=flag)
    tr.params.update(p.as_dict(), n=n, d=d, m_d=m_d, schedule=[t.as_dict() for t in schedule])
    (tr.certify if flag == "derived" else tr.note)(
        "beta = gamma^2/4k", all(t.beta == p.beta for t in schedule))
    ell = find_line(A)
    if ell is not None:
        tr.certify("line inside set", A.contains_all(ell.indices()), line=ell)
        tr.outcome = "line_found"
        return LineFound(ell, tr)
    if m_d > n:
        tr.outcome = "hypothesis_not_met"
        return NotMet("scale", f"working dimension {m_d} exceeds n={n}", {"m_d": m_d, "n": n}, tr)
    try:
        cor = correlate(A, m_d, p, gr_dim=gr_dim, gr_oracle=gr_oracle,
                        trace=tr.child(ProcedureTrace("correlate", flag=flag)))
        if not isinstance(cor, Correlation):
            tr.outcome = cor.tag
            return cor
        W = cor.subspace
        tiles = tile_intersection(cor.parts, schedule,
                                  trace=tr.child(ProcedureTrace("tile_intersection", flag=flag)))
        AW = A.pullback(W)
        U = tiles.covered
        gain = p.delta + p.gamma / 2
        tr.round(W=W, D=cor.core.density(), members=len(tiles), covered=U.density(),
                 residual=tiles.residual)
        tr.require("averaging", "covered part nonempty", len(U) > 0)
        tr.require("averaging", "dens(A ∩ ∪V) >= (delta+gamma/2) dens(∪V)",
                   (AW & U).density() >= gain * U.density(),
                   value=(AW & U).density(), bound=gain * U.density())
    except HypothesisNotMet as e:
        tr.outcome = "hypothesis_not_met"
        return NotMet.from_exception(e, tr)
    dens = [AW.density_in(V) for V in tiles.members]
    best = max(dens)
    V = tiles.members[dens.index(best)]
    tr.certify("best member dense", best >= gain, density=best)
    out = W.compose(V)
    measured = A.density_in(out)
    tr.certify("increment rechecked", measured == best and measured >= gain and out.dim == d,
               subspace=out, density=measured)
    tr.outcome = "increment"
    return Increment(out, measured, tr)


# ---------------------------------------------------------------- iteration

@dataclass
class DriverResult:
    status: str  # line_found | hypothesis_not_met | round_cap
    line: Subspace | None
    rounds: int
    embedding: Subspace
    densities: list[Fraction]
    steps: list[ProcedureTrace] = field(default_factory=list)
    failure: NotMet | None = None

    def to_json(self) -> dict:
        from dhj.trace import jsonable
        return {"status": self.status, "line": jsonable(self.line), "rounds": self.rounds,
                "embedding": str(self.embedding), "densities": jsonable(self.densities),
                "failure": None if self.failure is None else
                {"stage": self.failure.stage, "reason": self.failure.reason,
                 "measured": jsonable(self.failure.measured)},
                "steps": [s.to_json() for s in self.steps]}


def dhj_driver(A: PointSet, delta: Fraction, d: int, plan, round_cap: int = 8) -> DriverResult:
    """Iterate the dichotomy, shrinking to the bumped subspace each time, until a line appears."""
    delta = Fraction(delta)
    K, k = A.k, A.k - 1
    if A.density() < delta:
        raise ValueError(f"density {A.density()} below delta={delta}")
    if round_cap < 1:
        raise ValueError("round cap must be >= 1")
    E = Subspace.identity(K, A.n)
    cur, level = A, delta
    densities = [A.density()]
    steps: list[ProcedureTrace] = []
    cap = round_cap
    for r in range(1, cap + 1):
        ell = find_line(cur)
        if ell is None:
            try:
                p = plan.params(k, level)
                if r == 1:
                    cap = min(round_cap, math.ceil(2 / p.gamma))
                m_d = plan.working_dim(k, d, p)
                gr = p.gr_dim if p.gr_dim is not None else plan.gr_dim(k, m_d)
                out = dichotomy_step(cur, d, p, plan.schedule(k, d, p), m_d, gr)
            except MissingOracleValue as e:
                fail = NotMet("parameters", str(e), {"key": str(e)})
                return DriverResult("hypothesis_not_met", None, r, E, densities, steps, fail)
            except OverflowError as e:
                fail = NotMet("scale", str(e), {})
                return DriverResult("hypothesis_not_met", None, r, E, densities, steps, fail)
            steps.append(out.trace)
        else:
            out = LineFound(ell)
        if isinstance(out, LineFound):
            line = E.compose(out.line)
            if not all(w in A for w in line.points()):
                raise AssertionError(f"line {line} escapes the original set")
            return DriverResult("line_found", line, r, E, densities, steps)
        if isinstance(out, NotMet):
            return DriverResult("hypothesis_not_met", None, r, E, densities, steps, out)
        E = E.compose(out.subspace)
        cur = cur.pullback(out.subspace)
        level = cur.density()
        densities.append(level)
        if r >= cap:
            break
    return DriverResult("round_cap", None, cap, E, densities, steps)
