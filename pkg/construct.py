"""Two-level construction: from a generating function xi and energies E1 < E2
to the potential U, the superpotential triplet and both wave functions.

Units are hbar = 2m = 1, so H = -d^2/dx^2 + U(x). With psi2 = xi * psi1 the
logarithmic derivative of psi1 is -chi' with

    chi' = (xi'' + dE xi) / (2 xi')

and the potential follows in three equivalent forms (A: explicit in xi and its
derivatives, B: through the Schwarzian derivative, C: E1 + chi'^2 - chi'').
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.integrate import trapezoid

from classify import CriticalClass, SingularityReport, analyze_singularities, predict_quantum_numbers
from errors import ConfigError, DegenerateSpec, NonNormalizable, RegularityError
from exprlang import ONE, ArrayLike, Div, ParsedFunction, RootSet, locate_roots

logger = logging.getLogger(__name__)

RICHARDSON_STEP = 1e-2      # offset relative to max(1, |x0|)
RICHARDSON_RADIUS = 1e-3    # points closer than this to a special point are extrapolated
GAUSS_NODES = 8
TAIL_LIMIT = 0.01
WPLUS_SLOPE_TOL = 1e-8


@dataclass(frozen=True)
class LevelPair:
    E1: float
    E2: float

    def __post_init__(self):
        if not (np.isfinite(self.E1) and np.isfinite(self.E2)):
            raise ConfigError(f"energies must be finite, got {self.E1}, {self.E2}", E1=self.E1, E2=self.E2)
        if self.E2 < self.E1:
            raise ConfigError(f"levels must be ordered E1 <= E2, got {self.E1} > {self.E2}", E1=self.E1, E2=self.E2)

    @classmethod
    def from_gap(cls, E1: float, deltaE: float) -> LevelPair:
        return cls(float(E1), float(E1) + float(deltaE))

    @property
    def deltaE(self) -> float:
        return self.E2 - self.E1

    @property
    def mean(self) -> float:
        return 0.5 * (self.E1 + self.E2)

    def to_dict(self) -> dict[str, float]:
        return {"E1": self.E1, "E2": self.E2, "deltaE": self.deltaE}


def require_gap(levels: LevelPair) -> None:
    if not levels.deltaE > 0:
        raise DegenerateSpec("deltaE must be positive for the one-dimensional construction",
                             E1=levels.E1, E2=levels.E2)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform, strictly increasing sample points; the endpoints are the truncation boundary."""
    points: npt.NDArray[np.float64]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 3:
            raise ValueError("a grid needs at least three points")
        steps = np.diff(points)
        if not np.all(steps > 0):
            raise ValueError("grid points must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> Grid:
        return cls(np.linspace(float(a), float(b), int(n)))

    @property
    def h(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def n(self) -> int:
        return int(self.points.size)

    def subgrid(self) -> Grid:
        """Every other point; for odd n both endpoints survive."""
        if self.n % 2 == 0:
            raise ValueError("subgrid needs an odd number of points")
        return Grid(self.points[::2])


class PotentialForm(str, Enum):
    A = "A"
    B = "B"
    C = "C"


@dataclass(frozen=True)
class AnalyticFactor:
    location: float
    exponent: int
    source: str  # "pole" or "critical"


@dataclass(frozen=True, eq=False)
class ConstructionResult:
    grid: Grid
    levels: LevelPair
    U: npt.NDArray[np.float64]
    psi1: npt.NDArray[np.float64]
    psi2: npt.NDArray[np.float64]
    chi_prime: npt.NDArray[np.float64]
    W: npt.NDArray[np.float64]
    Wplus: npt.NDArray[np.float64]
    Wminus: npt.NDArray[np.float64]
    analytic_node_factors: tuple[AnalyticFactor, ...] = ()
    psi2_scale: float = 1.0
    xi: ParsedFunction | None = None
    report: SingularityReport | None = None
    inverted: bool = False
    advisory: str | None = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "x": self.grid.points,
            "U": self.U,
            "psi1": self.psi1,
            "psi2": self.psi2,
            "W": self.W,
            "chi_prime": self.chi_prime,
            "Wplus": self.Wplus,
            "Wminus": self.Wminus,
        })

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, levels: LevelPair,
                   report: SingularityReport | None = None) -> ConstructionResult:
        """Rebuild a result from a table written by ``to_frame``."""
        def column(name: str) -> npt.NDArray[np.float64]:
            if name in frame:
                return frame[name].to_numpy(dtype=float)
            return np.full(len(frame), np.nan)

        return cls(
            grid=Grid(frame["x"].to_numpy(dtype=float)),
            levels=levels,
            U=column("U"), psi1=column("psi1"), psi2=column("psi2"),
            chi_prime=column("chi_prime"), W=column("W"),
            Wplus=column("Wplus"), Wminus=column("Wminus"),
            report=report,
        )


# ------------------------------------------------------- pointwise formulas

def as_output(x: ArrayLike, values: npt.NDArray[np.float64]) -> ArrayLike:
    if np.ndim(x) == 0:
        return float(np.asarray(values).reshape(-1)[0])
    return values


def sample_derivatives(f: ParsedFunction, x: ArrayLike, orders: Sequence[int]) -> list[npt.NDArray[np.float64]]:
    xs = np.asarray(x, dtype=float)
    return [np.asarray(f(xs, k), dtype=float) for k in orders]


def chi_prime(xi: ParsedFunction, deltaE: float, x: ArrayLike) -> ArrayLike:
    """(xi'' + dE xi) / (2 xi'); NaN wherever xi' vanishes."""
    f, d1, d2 = sample_derivatives(xi, x, (0, 1, 2))
    with np.errstate(all="ignore"):
        values = np.where(d1 == 0.0, np.nan, (d2 + deltaE * f) / (2.0 * d1))
    return as_output(x, values)


def chi_double_prime(xi: ParsedFunction, deltaE: float, x: ArrayLike) -> ArrayLike:
    f, d1, d2, d3 = sample_derivatives(xi, x, (0, 1, 2, 3))
    with np.errstate(all="ignore"):
        values = (d3 + deltaE * d1) / (2.0 * d1) - (d2 + deltaE * f) * d2 / (2.0 * d1 ** 2)
        values = np.where(d1 == 0.0, np.nan, values)
    return as_output(x, values)


def schwarzian(f: ParsedFunction, x: ArrayLike) -> ArrayLike:
    """f'''/f' - 3/2 (f''/f')^2; NaN where f' = 0."""
    d1, d2, d3 = sample_derivatives(f, x, (1, 2, 3))
    with np.errstate(all="ignore"):
        values = np.where(d1 == 0.0, np.nan, d3 / d1 - 1.5 * (d2 / d1) ** 2)
    return as_output(x, values)


def potential_at(xi: ParsedFunction, e1: float, deltaE: float, x: ArrayLike,
                 form: PotentialForm = PotentialForm.A) -> ArrayLike:
    """Naive pointwise potential; deltaE may be negative (swapped orientation)."""
    form = PotentialForm(form)
    f, d1, d2, d3 = sample_derivatives(xi, x, (0, 1, 2, 3))
    with np.errstate(all="ignore"):
        if form is PotentialForm.C:
            chi1 = (d2 + deltaE * f) / (2.0 * d1)
            chi2 = (d3 + deltaE * d1) / (2.0 * d1) - (d2 + deltaE * f) * d2 / (2.0 * d1 ** 2)
            values = e1 + chi1 ** 2 - chi2
        else:
            ratio = f / d1
            tail = deltaE * ratio * d2 / d1 + 0.25 * deltaE ** 2 * ratio ** 2
            if form is PotentialForm.A:
                shape = 0.75 * (d2 / d1) ** 2 - 0.5 * d3 / d1
            else:
                shape = -0.5 * (d3 / d1 - 1.5 * (d2 / d1) ** 2)
            values = e1 - 0.5 * deltaE + shape + tail
    return as_output(x, np.asarray(values, dtype=float))


def regularized(fn: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]], x: ArrayLike,
                special_points: Iterable[float] = ()) -> ArrayLike:
    """Evaluate a function that is smooth but numerically 0/0 at isolated points.

    Points within a small radius of a special point, and points where the
    naive value is not finite, are replaced by a three-level symmetric
    Richardson extrapolation centred on the point itself.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    flat = xs.ravel()
    with np.errstate(all="ignore"):
        values = np.array(np.broadcast_to(np.asarray(fn(flat), dtype=float), flat.shape))
    specials = np.unique(np.asarray([s for s in special_points if np.isfinite(s)], dtype=float))

    steps = RICHARDSON_STEP * np.maximum(1.0, np.abs(flat))
    near = np.zeros(flat.shape, dtype=bool)
    if specials.size:
        special_steps, radii = _special_steps(specials)
        nearest = np.argmin(np.abs(flat[:, None] - specials[None, :]), axis=1)
        near = np.abs(flat - specials[nearest]) < radii[nearest]
        steps = np.where(near, special_steps[nearest], steps)

    for i in np.nonzero(near | ~np.isfinite(values))[0]:
        values[i] = _richardson(fn, flat[i], steps[i])
    return as_output(x, values.reshape(xs.shape))


def _special_steps(specials: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    steps = RICHARDSON_STEP * np.maximum(1.0, np.abs(specials))
    if specials.size > 1:
        gaps = np.diff(specials)
        nearest_gap = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
        steps = np.minimum(steps, 0.25 * nearest_gap)
    radii = np.minimum(RICHARDSON_RADIUS * np.maximum(1.0, np.abs(specials)), steps / 8.0)
    return steps, radii


def _richardson(fn, x: float, step: float) -> float:
    offsets = np.array([step, step / 2.0, step / 4.0])
    with np.errstate(all="ignore"):
        upper = np.asarray(fn(x + offsets), dtype=float)
        lower = np.asarray(fn(x - offsets), dtype=float)
    m = 0.5 * (upper + lower)
    first = (4.0 * m[1:] - m[:-1]) / 3.0
    return float((16.0 * first[1] - first[0]) / 15.0)


def potential(xi: ParsedFunction, levels: LevelPair, x: ArrayLike,
              form: PotentialForm = PotentialForm.A,
              special_points: Iterable[float] = ()) -> ArrayLike:
    """U(x) for the pair ``levels``; removable points are extrapolated."""
    require_gap(levels)
    return regularized(lambda t: potential_at(xi, levels.E1, levels.deltaE, t, form), x, special_points)


# ----------------------------------------------------------- superpotential

def superpotential_triplet(xi: ParsedFunction, deltaE: float, x: ArrayLike) -> tuple[ArrayLike, ArrayLike, ArrayLike]:
    """(W+, W-, W) with W+ = dE xi/xi', W- = (W+' - dE)/W+ and W = (W+ - W-)/2."""
    f, d1, d2 = sample_derivatives(xi, x, (0, 1, 2))
    with np.errstate(all="ignore"):
        wplus = deltaE * f / d1
        wplus_prime = deltaE - deltaE * f * d2 / d1 ** 2
        wminus = (wplus_prime - deltaE) / wplus
        w = 0.5 * (wplus - wminus)
    return as_output(x, wplus), as_output(x, wminus), as_output(x, w)


def triplet_from_wplus(wplus: ParsedFunction, delta: float, x: ArrayLike) -> tuple[ArrayLike, ArrayLike, ArrayLike]:
    wp, dwp = sample_derivatives(wplus, x, (0, 1))
    with np.errstate(all="ignore"):
        wminus = (dwp - delta) / wp
        w = 0.5 * (wp - wminus)
    return as_output(x, wp), as_output(x, wminus), as_output(x, w)


def check_wplus_zeros(wplus: ParsedFunction, delta: float, interval: tuple[float, float],
                      scan_points: int = 2048) -> RootSet:
    """Zeros of W+; each must have W+' = delta there for W- to stay regular."""
    zeros = locate_roots(wplus, interval, scan_points)
    for root in zeros:
        slope = float(wplus(root.location, 1))
        if abs(slope - delta) > WPLUS_SLOPE_TOL * max(1.0, abs(delta)):
            raise RegularityError(
                f"W+ vanishes at x={root.location:.12g} with slope {slope:.12g} != {delta:.12g}",
                location=root.location, slope=slope, delta=delta,
            )
    return zeros


def potential_from_wplus(wplus: ParsedFunction, delta: float, e1: float, x: ArrayLike,
                         special_points: Iterable[float] = ()) -> ArrayLike:
    """U = E1 + W^2 - W' with W built from a given W+."""
    def naive(t):
        wp, d1, d2 = sample_derivatives(wplus, t, (0, 1, 2))
        wminus = (d1 - delta) / wp
        wminus_prime = d2 / wp - (d1 - delta) * d1 / wp ** 2
        w = 0.5 * (wp - wminus)
        return e1 + w ** 2 - 0.5 * (d1 - wminus_prime)

    return regularized(naive, x, special_points)


# ---------------------------------------------------------------- synthesis

def cell_integrals(fn, points: npt.NDArray[np.float64], special_points: Sequence[float]) -> npt.NDArray[np.float64]:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    mid = 0.5 * (points[1:] + points[:-1])
    half = 0.5 * (points[1:] - points[:-1])
    samples = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.asarray(regularized(fn, samples.ravel(), special_points)).reshape(samples.shape)
    return half * (values @ weights)


def tail_fraction(points: npt.NDArray[np.float64], psi: npt.NDArray[np.float64],
                   outer: npt.NDArray[np.bool_]) -> float:
    density = psi ** 2
    total = trapezoid(density, points)
    return float(trapezoid(np.where(outer, density, 0.0), points) / total)


def normalize_log_samples(points, logmag, sign) -> tuple[npt.NDArray[np.float64], float, float]:
    finite = np.isfinite(logmag)
    if not np.any(finite) or np.any(np.isnan(logmag)):
        raise NonNormalizable("wave function is undefined on the grid", undefined=int(np.sum(np.isnan(logmag))))
    peak = float(np.max(logmag[finite]))
    with np.errstate(all="ignore"):
        raw = sign * np.exp(logmag - peak)
    raw = np.where(np.isnan(raw), 0.0, raw)
    norm = float(np.sqrt(trapezoid(raw ** 2, points)))
    return raw / norm, peak, norm


def synthesize_wavefunctions(xi: ParsedFunction, levels: LevelPair, grid: Grid,
                             report: SingularityReport, tail_limit: float = TAIL_LIMIT,
                             outer: npt.NDArray[np.bool_] | None = None) -> ConstructionResult:
    """Sample U, psi1, psi2 and the superpotentials on ``grid``.

    psi1 = prod(x - s) exp(-int chi'_reg) where s runs over the poles of xi and
    the B = -1 critical points and chi'_reg = chi' + sum 1/(x - s) is smooth.
    psi2 = xi_reg prod_{B=-1}(x - c) exp(-int chi'_reg) with xi_reg = xi prod_poles(x - p).
    Each state is normalized separately; ``psi2_scale`` restores psi2 = xi psi1.
    """
    require_gap(levels)
    if report.violations:
        worst = report.violations[0]
        raise RegularityError(
            f"critical point at x={worst.location:.12g} has B={worst.B:.12g}",
            location=worst.location, B=worst.B,
        )
    points = grid.points
    deltaE = levels.deltaE
    inside = lambda s: grid.a <= s <= grid.b  # noqa: E731
    poles = [p for p in report.poles.locations if inside(p)]
    shared = [c.location for c in report.criticals if c.cls is CriticalClass.BMINUS1 and inside(c.location)]
    factors = tuple(
        [AnalyticFactor(p, 1, "pole") for p in poles] + [AnalyticFactor(c, 1, "critical") for c in shared]
    )
    subtract = np.asarray(poles + shared, dtype=float)
    specials = sorted(set(report.poles.locations) | {c.location for c in report.criticals})

    def chi_reg(t):
        t = np.asarray(t, dtype=float)
        correction = np.sum(1.0 / (t[..., None] - subtract), axis=-1) if subtract.size else 0.0
        return np.asarray(chi_prime(xi, deltaE, t)) + correction

    with np.errstate(all="ignore"):
        chi = np.concatenate([[0.0], np.cumsum(cell_integrals(chi_reg, points, specials))])
        node_log = np.zeros_like(points)
        node_sign = np.ones_like(points)
        for s in subtract:
            node_log += np.log(np.abs(points - s))
            node_sign *= np.sign(points - s)
        shared_log = np.zeros_like(points)
        shared_sign = np.ones_like(points)
        for c in shared:
            shared_log += np.log(np.abs(points - c))
            shared_sign *= np.sign(points - c)

        pole_array = np.asarray(poles, dtype=float)

        def xi_reg(t):
            t = np.asarray(t, dtype=float)
            factor = np.prod(t[..., None] - pole_array, axis=-1) if pole_array.size else 1.0
            return np.asarray(xi(t)) * factor

        xi_reg_values = np.asarray(regularized(xi_reg, points, poles), dtype=float)
        psi1, peak1, norm1 = normalize_log_samples(points, node_log - chi, node_sign)
        psi2, peak2, norm2 = normalize_log_samples(
            points, np.log(np.abs(xi_reg_values)) + shared_log - chi, np.sign(xi_reg_values) * shared_sign,
        )
        psi2_scale = float(np.exp(peak2 - peak1) * norm2 / norm1)

    if outer is None:
        centre, half_width = 0.5 * (grid.a + grid.b), 0.5 * (grid.b - grid.a)
        outer = np.abs(points - centre) > 0.5 * half_width
    for which, psi in ((1, psi1), (2, psi2)):
        tail = tail_fraction(points, psi, outer)
        if tail > tail_limit:
            raise NonNormalizable(
                f"psi{which} keeps {tail:.3g} of its probability near the boundary",
                state=which, tail=tail,
            )

    U = np.asarray(potential(xi, levels, points, PotentialForm.A, specials), dtype=float)
    chi_values = np.asarray(chi_prime(xi, deltaE, points), dtype=float)
    wplus, wminus, w = superpotential_triplet(xi, deltaE, points)
    logger.info("synthesized %s on [%g, %g] with %d points, %d analytic factors",
                xi.describe(), grid.a, grid.b, grid.n, len(factors))
    return ConstructionResult(
        grid=grid, levels=levels, U=U, psi1=psi1, psi2=psi2, chi_prime=chi_values,
        W=np.asarray(w), Wplus=np.asarray(wplus), Wminus=np.asarray(wminus),
        analytic_node_factors=factors, psi2_scale=psi2_scale, xi=xi, report=report,
    )


def residual_check(result: ConstructionResult, which: int, energy: float | None = None) -> float:
    """max |-psi''_FD + (U - E) psi| / max|psi| over interior points.

    Points within three grid steps of an analytic node factor, and points
    with a non-finite potential, are excluded.
    """
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    psi = result.psi1 if which == 1 else result.psi2
    if energy is None:
        energy = result.levels.E1 if which == 1 else result.levels.E2
    points, h = result.grid.points, result.grid.h
    second = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h ** 2
    residual = np.abs(-second + (result.U[1:-1] - energy) * psi[1:-1])
    keep = np.isfinite(residual)
    for factor in result.analytic_node_factors:
        keep &= np.abs(points[1:-1] - factor.location) > 3.0 * h
    if not np.any(keep):
        return float("nan")
    return float(np.max(residual[keep]) / np.max(np.abs(psi)))


def invert(xi: ParsedFunction) -> ParsedFunction:
    text = f"1/({xi.text})" if xi.text is not None else None
    return ParsedFunction(Div(ONE, xi.base), text)


def build_construction(xi: ParsedFunction, levels: LevelPair, interval: tuple[float, float],
                       grid_points: int, scan_points: int = 2048, b_tolerance: float = 1e-8,
                       tail_limit: float = TAIL_LIMIT) -> ConstructionResult:
    """Analyze, orient and synthesize in one step.

    When the counting rule puts the lower level above the upper one, the
    construction continues with 1/xi, which swaps the roles of poles and zeros.
    """
    require_gap(levels)
    report = analyze_singularities(xi, levels.deltaE, interval, scan_points, b_tolerance)
    numbers = predict_quantum_numbers(report)
    inverted = False
    if numbers.advisory is not None:
        logger.warning(numbers.advisory)
        xi = invert(xi)
        report = analyze_singularities(xi, levels.deltaE, interval, scan_points, b_tolerance)
        predict_quantum_numbers(report)
        inverted = True
    grid = Grid.uniform(interval[0], interval[1], grid_points)
    result = synthesize_wavefunctions(xi, levels, grid, report, tail_limit)
    if inverted:
        result = replace(result, inverted=True, advisory=numbers.advisory)
    return result
