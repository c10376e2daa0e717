"""Finite-difference eigen-oracle for -d^2/dx^2 + U with Dirichlet boundaries.

Eigenvalues come from Sturm-sequence bisection on the symmetric tridiagonal
matrix, eigenvectors from inverse iteration. Nothing here looks at the
generating function: only the sampled potential enters, and the constructed
wave functions are used for the final overlap comparison alone.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import numpy.typing as npt
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from classify import SingularityReport
from construct import ConstructionResult, Grid
from errors import ConvergenceFailure, NonFinitePotential, VerificationFailure

logger = logging.getLogger(__name__)

BISECTION_REL_WIDTH = 1e-12
INVERSE_ITERATIONS = 5
CLUSTER_GAP = 1e-8
NODE_FLOOR = 1e-6
OVERLAP_MIN = 0.999
TOL_COEFFICIENT = 0.1
TOL_FLOOR = 1e-5
BOUNDARY_AMPLITUDE = 1e-10


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    diagonal: npt.NDArray[np.float64]
    off_diagonal: float
    h: float
    domain: tuple[float, float]
    interior: npt.NDArray[np.float64]

    @property
    def dim(self) -> int:
        return int(self.diagonal.size)

    def gershgorin(self) -> tuple[float, float]:
        spread = 2.0 * abs(self.off_diagonal)
        return float(np.min(self.diagonal) - spread), float(np.max(self.diagonal) + spread)

    @property
    def scale(self) -> float:
        lo, hi = self.gershgorin()
        return max(1.0, abs(lo), abs(hi))

    def apply(self, v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        out = self.diagonal * v
        out[1:] += self.off_diagonal * v[:-1]
        out[:-1] += self.off_diagonal * v[1:]
        return out


@dataclass(frozen=True, eq=False)
class EigenResult:
    index: int
    value: float
    vector: npt.NDArray[np.float64]  # on the full grid, zero at both ends
    nodes: int

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "value": self.value, "nodes": self.nodes}


@dataclass(frozen=True, eq=False)
class VerificationReport:
    predicted: tuple[int, float, int, float]
    found: tuple[EigenResult, EigenResult]
    extrapolated: tuple[float, float]
    eigenvalue_errors: tuple[float, float]
    overlaps: tuple[float, float]
    tol_E: float
    h: float
    domain: tuple[float, float]
    passed: bool
    warnings: tuple[str, ...] = field(default=())

    @property
    def gap(self) -> float:
        return self.extrapolated[1] - self.extrapolated[0]

    def to_dict(self) -> dict[str, Any]:
        N1, E1, N2, E2 = self.predicted
        return {
            "predicted": {"N1": N1, "E1": E1, "N2": N2, "E2": E2},
            "found": [r.to_dict() for r in self.found],
            "extrapolated": list(self.extrapolated),
            "gap": self.gap,
            "eigenvalue_errors": list(self.eigenvalue_errors),
            "overlaps": list(self.overlaps),
            "tol_E": self.tol_E,
            "h": self.h,
            "domain": list(self.domain),
            "pass": self.passed,
            "warnings": list(self.warnings),
        }


def discretize(U: npt.NDArray[np.float64], grid: Grid) -> TridiagonalOperator:
    """Three-point stencil on the interior points; psi = 0 at both ends."""
    U = np.asarray(U, dtype=float)
    if U.shape != grid.points.shape:
        raise ValueError(f"potential has {U.size} samples for a grid of {grid.n}")
    interior = U[1:-1]
    bad = ~np.isfinite(interior)
    if np.any(bad):
        first = float(grid.points[1:-1][bad][0])
        raise NonFinitePotential(f"potential is not finite at {int(bad.sum())} interior points (first x={first:.12g})",
                                 count=int(bad.sum()), location=first)
    h = grid.h
    return TridiagonalOperator(
        diagonal=2.0 / h ** 2 + interior,
        off_diagonal=-1.0 / h ** 2,
        h=h,
        domain=(grid.a, grid.b),
        interior=grid.points[1:-1].copy(),
    )


def sturm_count(T: TridiagonalOperator, lam: float) -> int:
    """Number of eigenvalues strictly below ``lam`` (negative LDL^T pivots)."""
    e2 = T.off_diagonal ** 2
    pivmin = np.finfo(float).tiny * max(1.0, e2)
    count = 0
    q = 1.0
    for i, d in enumerate(T.diagonal.tolist()):
        q = d - lam if i == 0 else (d - lam) - e2 / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


def eigenvalue_by_index(T: TridiagonalOperator, k: int) -> float:
    if not 0 <= k < T.dim:
        raise ValueError(f"index {k} outside 0..{T.dim - 1}")
    lo, hi = T.gershgorin()
    while hi - lo > BISECTION_REL_WIDTH * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sturm_count(T, mid) > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _banded(T: TridiagonalOperator, shift: float) -> npt.NDArray[np.float64]:
    ab = np.empty((3, T.dim))
    ab[0, :] = T.off_diagonal
    ab[1, :] = T.diagonal - shift
    ab[2, :] = T.off_diagonal
    return ab


def _orient(v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    big = np.nonzero(np.abs(v) > NODE_FLOOR * np.max(np.abs(v)))[0]
    return -v if big.size and v[big[0]] < 0 else v


def eigenpair_by_index(T: TridiagonalOperator, k: int,
                       previous: Sequence[EigenResult] = ()) -> EigenResult:
    """k-th eigenpair; the vector is normalized with the trapezoid rule on the grid."""
    value = eigenvalue_by_index(T, k)
    clustered = [p.vector[1:-1] for p in previous
                 if abs(p.value - value) < CLUSTER_GAP * max(1.0, abs(value))]
    ab = _banded(T, value)
    v = np.random.default_rng(k).standard_normal(T.dim)
    v /= np.linalg.norm(v)
    tolerance = 1e-9 * T.scale
    residual = np.inf
    for iteration in range(INVERSE_ITERATIONS):
        v = solve_banded((1, 1), ab, v, check_finite=False)
        for u in clustered:
            v -= (v @ u) / (u @ u) * u
        v /= np.linalg.norm(v)
        residual = float(np.linalg.norm(T.apply(v) - value * v))
        if residual <= tolerance:
            break
    else:
        raise ConvergenceFailure(
            f"inverse iteration for index {k} did not converge (residual {residual:.3g})",
            index=k, value=value, residual=residual, iterations=INVERSE_ITERATIONS,
        )
    vector = np.concatenate([[0.0], _orient(v), [0.0]])
    vector /= np.sqrt(T.h * np.sum(vector ** 2))
    return EigenResult(k, value, vector, count_nodes(vector))


def count_nodes(vector: npt.NDArray[np.float64], floor: float = NODE_FLOOR) -> int:
    """Sign changes among samples with |v| > floor * max|v|."""
    v = np.asarray(vector, dtype=float)
    peak = np.max(np.abs(v))
    if not peak > 0:
        return 0
    signs = np.sign(v[np.abs(v) > floor * peak])
    return int(np.sum(signs[1:] != signs[:-1]))


def richardson_eigenvalue(fine: float, coarse: float) -> float:
    """Second-order extrapolation from spacings h and 2h."""
    return (4.0 * fine - coarse) / 3.0


def _overlap(grid: Grid, numeric: npt.NDArray[np.float64], constructed: npt.NDArray[np.float64]) -> float:
    return abs(float(trapezoid(numeric * constructed, grid.points)))


def verify_two_levels(result: ConstructionResult, report: SingularityReport,
                      node_floor: float = NODE_FLOOR, overlap_min: float = OVERLAP_MIN,
                      tol_coefficient: float = TOL_COEFFICIENT,
                      boundary_amplitude: float = BOUNDARY_AMPLITUDE,
                      raise_on_failure: bool = True) -> VerificationReport:
    """Check that E1, E2 sit at spectral indices N1, N2 of the sampled potential."""
    grid, levels = result.grid, result.levels
    N1, N2 = report.N1, report.N2
    T = discretize(result.U, grid)
    coarse = discretize(result.U[::2], grid.subgrid())
    scale = max(1.0, abs(levels.E1), abs(levels.E2))
    tol_E = max(TOL_FLOOR, tol_coefficient * grid.h ** 2 * scale ** 2)

    found: list[EigenResult] = []
    extrapolated, errors, overlaps = [], [], []
    warnings: list[str] = []
    for k, energy, psi in ((N1, levels.E1, result.psi1), (N2, levels.E2, result.psi2)):
        pair = eigenpair_by_index(T, k, found)
        if node_floor != NODE_FLOOR:
            pair = EigenResult(pair.index, pair.value, pair.vector, count_nodes(pair.vector, node_floor))
        found.append(pair)
        value = richardson_eigenvalue(pair.value, eigenvalue_by_index(coarse, k))
        extrapolated.append(value)
        errors.append(abs(value - energy))
        overlaps.append(_overlap(grid, pair.vector, psi))

        window = CLUSTER_GAP * max(1.0, abs(pair.value))
        if sturm_count(T, pair.value + window) - sturm_count(T, pair.value - window) > 1:
            message = f"eigenvalue {k} at {pair.value:.12g} is clustered within {window:.1g}"
            logger.warning(message)
            warnings.append(f"ClusterWarning: {message}")
        edge = max(abs(pair.vector[1]), abs(pair.vector[-2]))
        if edge > boundary_amplitude * np.max(np.abs(pair.vector)):
            message = f"state {k} has relative amplitude {edge / np.max(np.abs(pair.vector)):.3g} at the boundary"
            logger.warning(message)
            warnings.append(f"TruncationWarning: {message}")

    passed = (
        all(e <= tol_E for e in errors)
        and found[0].nodes == N1 and found[1].nodes == N2
        and all(o >= overlap_min for o in overlaps)
    )
    report_out = VerificationReport(
        predicted=(N1, levels.E1, N2, levels.E2),
        found=(found[0], found[1]),
        extrapolated=(extrapolated[0], extrapolated[1]),
        eigenvalue_errors=(errors[0], errors[1]),
        overlaps=(overlaps[0], overlaps[1]),
        tol_E=tol_E, h=grid.h, domain=(grid.a, grid.b),
        passed=passed, warnings=tuple(warnings),
    )
    logger.info("verification on [%g, %g]: errors %s, overlaps %s, pass=%s",
                grid.a, grid.b, errors, overlaps, passed)
    if raise_on_failure and not passed:
        raise VerificationFailure("constructed levels not confirmed by the eigensolver", report_out)
    return report_out
