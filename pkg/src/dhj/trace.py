"""Procedure traces, outcome records and the exceptions the engine raises."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

from dhj.cube import Subspace
from dhj.pointset import PointSet


class HypothesisNotMet(Exception):
    """A step of a procedure could not be completed at the given scale."""

    def __init__(self, stage: str, reason: str, trace: "ProcedureTrace | None" = None, **measured):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason
        self.measured = measured
        self.trace = trace


class Exhausted(HypothesisNotMet):
    """The procedure ran out of room (ambient length) or density."""


class CertificateError(AssertionError):
    """An independent recheck of a claimed postcondition failed (internal error)."""


def jsonable(x: Any) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return x
    if isinstance(x, Subspace):
        return str(x)
    if isinstance(x, PointSet):
        return {"k": x.k, "n": x.n, "words": x.texts()}
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if hasattr(x, "tolist"):
        return x.tolist()
    return str(x)


@dataclass
class ProcedureTrace:
    procedure: str
    params: dict = field(default_factory=dict)
    rounds: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    children: list["ProcedureTrace"] = field(default_factory=list)
    outcome: str = ""
    flag: str = "derived"
    started: float = field(default_factory=time.perf_counter)

    def round(self, **info) -> dict:
        info = {"round": len(self.rounds) + 1, **info}
        self.rounds.append(info)
        return info

    def certify(self, name: str, ok: bool, **measured) -> None:
        """Record a rechecked fact; a failure is an internal error."""
        self.checks.append({"fact": name, "ok": bool(ok), **measured})
        if not ok:
            raise CertificateError(f"{self.procedure}: recheck failed: {name} {measured}")

    def require(self, stage: str, name: str, ok: bool, **measured) -> None:
        """Record a measured inequality the procedure needs; failure means the hypothesis is not met."""
        self.checks.append({"fact": name, "ok": bool(ok), **measured})
        if not ok:
            self.outcome = "hypothesis_not_met"
            raise HypothesisNotMet(stage, f"{name} fails", self, **measured)

    def note(self, name: str, ok: bool, **measured) -> None:
        self.checks.append({"fact": name, "ok": bool(ok), "enforced": False, **measured})

    def child(self, trace: "ProcedureTrace") -> "ProcedureTrace":
        self.children.append(trace)
        return trace

    def to_json(self) -> dict:
        return {
            "procedure": self.procedure,
            "flag": self.flag,
            "params": jsonable(self.params),
            "rounds": jsonable(self.rounds),
            "checks": jsonable(self.checks),
            "outcome": self.outcome,
            "children": [c.to_json() for c in self.children],
        }


# ---------------------------------------------------------------- outcomes

@dataclass
class LineFound:
    line: Subspace
    trace: ProcedureTrace | None = None
    tag = "line_found"


@dataclass
class Increment:
    subspace: Subspace
    density: Fraction
    trace: ProcedureTrace | None = None
    tag = "increment"


@dataclass
class NotMet:
    stage: str
    reason: str
    measured: dict = field(default_factory=dict)
    trace: ProcedureTrace | None = None
    tag = "hypothesis_not_met"

    @classmethod
    def from_exception(cls, exc: HypothesisNotMet, trace: ProcedureTrace | None = None) -> "NotMet":
        return cls(exc.stage, exc.reason, dict(exc.measured), trace or exc.trace)


DichotomyOutcome = Union[LineFound, Increment, NotMet]
