"""Analytic structure of a generating function and the node-count prediction.

Every pole of xi is a node of psi1, every zero a node of psi2, and every
critical point with B = -1 a node shared by both. Critical points with any
other B than 0 or -1 make the potential singular and are refused.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

from errors import (DegenerateCritical, OscillationError, RegularityError, SimplicityViolation,
                    TwoLevelError)
from exprlang import ParsedFunction, RootSet, locate_poles, locate_roots

logger = logging.getLogger(__name__)

B_TOLERANCE = 1e-8
CURVATURE_TOL = 1e-12


class CriticalClass(str, Enum):
    B0 = "B0"
    BMINUS1 = "Bminus1"
    IRREGULAR = "Irregular"


@dataclass(frozen=True)
class CriticalPoint:
    location: float
    B: float
    cls: CriticalClass

    def to_dict(self) -> dict[str, Any]:
        return {"location": self.location, "B": self.B, "class": self.cls.value}


@dataclass(frozen=True)
class OutsidePoint:
    location: float
    kind: str  # zero, pole or critical


@dataclass(frozen=True)
class SingularityReport:
    poles: RootSet
    zeros: RootSet
    criticals: tuple[CriticalPoint, ...]
    interval: tuple[float, float]
    deltaE: float
    beyond_boundary: tuple[OutsidePoint, ...] = ()
    warnings: tuple[str, ...] = field(default=())

    @property
    def n1(self) -> int:
        return len(self.poles)

    @property
    def n2(self) -> int:
        return len(self.zeros)

    @property
    def m0(self) -> int:
        return sum(1 for c in self.criticals if c.cls is CriticalClass.B0)

    @property
    def m_minus(self) -> int:
        return sum(1 for c in self.criticals if c.cls is CriticalClass.BMINUS1)

    @property
    def N1(self) -> int:
        return self.n1 + self.m_minus

    @property
    def N2(self) -> int:
        return self.n2 + self.m_minus

    @property
    def violations(self) -> tuple[CriticalPoint, ...]:
        return tuple(c for c in self.criticals if c.cls is CriticalClass.IRREGULAR)

    def to_dict(self) -> dict[str, Any]:
        return {
            "interval": list(self.interval),
            "deltaE": self.deltaE,
            "poles": self.poles.locations,
            "zeros": self.zeros.locations,
            "criticals": [c.to_dict() for c in self.criticals],
            "counts": {"n1": self.n1, "n2": self.n2, "m0": self.m0, "m_minus": self.m_minus},
            "N1": self.N1,
            "N2": self.N2,
            "beyond_boundary": [{"location": p.location, "kind": p.kind} for p in self.beyond_boundary],
            "warnings": list(self.warnings),
        }


class QuantumNumbers(NamedTuple):
    N1: int
    N2: int
    advisory: str | None = None


def classify_critical_point(xi: ParsedFunction, deltaE: float, x0: float,
                            tol: float = B_TOLERANCE) -> CriticalPoint:
    """B = (xi'' + dE xi) / (2 xi'') at a zero of xi'."""
    value, curvature, third = xi(x0), xi(x0, 2), xi(x0, 3)
    scale = max(abs(value), abs(third) if np.isfinite(third) else 0.0)
    if not np.isfinite(curvature) or curvature == 0.0 or abs(curvature) <= CURVATURE_TOL * scale:
        raise DegenerateCritical(f"xi'' vanishes at the critical point x={x0:.12g}", location=x0)
    B = (curvature + deltaE * value) / (2.0 * curvature)
    if abs(B) < tol:
        cls = CriticalClass.B0
    elif abs(B + 1.0) < tol:
        cls = CriticalClass.BMINUS1
    else:
        cls = CriticalClass.IRREGULAR
    return CriticalPoint(float(x0), float(B), cls)


def _critical_points(xi: ParsedFunction, interval: tuple[float, float], scan_points: int) -> RootSet:
    try:
        return locate_roots(xi.derivative_function(), interval, scan_points)
    except SimplicityViolation as exc:
        raise DegenerateCritical(f"degenerate critical point: {exc}", **exc.details()) from exc


def _outside(xi: ParsedFunction, interval: tuple[float, float], scan_points: int) -> tuple[list[OutsidePoint], list[str]]:
    a, b = interval
    half = 0.5 * (b - a)
    found: list[OutsidePoint] = []
    notes: list[str] = []
    for window in ((a - half, a), (b, b + half)):
        for kind, scan in (("zero", lambda w: locate_roots(xi, w, scan_points)),
                           ("pole", lambda w: locate_poles(xi, w, scan_points)),
                           ("critical", lambda w: _critical_points(xi, w, scan_points))):
            try:
                roots = scan(window)
            except TwoLevelError as exc:
                notes.append(f"{kind} scan of [{window[0]:.6g}, {window[1]:.6g}] failed: {exc}")
                continue
            found.extend(OutsidePoint(r.location, kind) for r in roots if not a <= r.location <= b)
    found.sort(key=lambda p: p.location)
    return found, notes


def analyze_singularities(xi: ParsedFunction, deltaE: float, interval: tuple[float, float],
                          scan_points: int = 2048, tol: float = B_TOLERANCE,
                          strict: bool = True) -> SingularityReport:
    """Poles, zeros and classified critical points of xi on ``interval``.

    With ``strict`` an irregular critical point raises RegularityError; without
    it the point is kept in the report and listed by ``violations``.
    """
    zeros = locate_roots(xi, interval, scan_points)
    poles = locate_poles(xi, interval, scan_points)
    candidates = _critical_points(xi, interval, scan_points)

    criticals: list[CriticalPoint] = []
    for root in candidates:
        x0 = root.location
        value = xi(x0)
        if np.isfinite(value) and abs(value) <= 1e-10 * abs(xi(x0, 2)):
            raise SimplicityViolation(f"xi and xi' vanish together at x={x0:.12g}", location=x0, kind="zero")
        point = classify_critical_point(xi, deltaE, x0, tol)
        logger.debug("critical point %.12g: B=%.3g (%s)", x0, point.B, point.cls.value)
        if strict and point.cls is CriticalClass.IRREGULAR:
            raise RegularityError(
                f"critical point at x={x0:.12g} has B={point.B:.12g}; the potential is singular there",
                location=x0, B=point.B,
            )
        criticals.append(point)

    beyond, notes = _outside(xi, interval, scan_points)
    if beyond:
        logger.info("%d special points just outside [%g, %g] are not counted", len(beyond), *interval)
    warnings = tuple(zeros.warnings) + tuple(poles.warnings) + tuple(candidates.warnings) + tuple(notes)
    return SingularityReport(
        poles=poles, zeros=zeros, criticals=tuple(criticals),
        interval=(float(interval[0]), float(interval[1])), deltaE=float(deltaE),
        beyond_boundary=tuple(beyond), warnings=warnings,
    )


def predict_quantum_numbers(report: SingularityReport) -> QuantumNumbers:
    """N1 = n1 + m(-), N2 = n2 + m(-); equal counts contradict the oscillation theorem."""
    if report.violations:
        worst = report.violations[0]
        raise RegularityError(f"critical point at x={worst.location:.12g} has B={worst.B:.12g}",
                              location=worst.location, B=worst.B)
    N1, N2 = report.N1, report.N2
    if N1 == N2:
        raise OscillationError(f"both states would have {N1} nodes", N1=N1, N2=N2)
    advisory = None
    if N1 > N2:
        advisory = (f"N1={N1} > N2={N2}: E1 cannot lie above E2 in node order; "
                    f"the relevant potential is U(E1, E2, 1/xi)")
    return QuantumNumbers(N1, N2, advisory)
