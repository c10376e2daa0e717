"""Spherically symmetric variant: two reduced radial states u1, u2 = xi u1 with
angular momenta l1, l2 and energies E1 <= E2.

The coupling lambda = (l2 - l1)(1 + l1 + l2) enters the log derivative as

    chi' = (xi'' + (dE - lambda/r^2) xi) / (2 xi')

and U = E1 - l1(l1+1)/r^2 + chi'^2 - chi''. For dE = 0 the two states are
degenerate and only differ by angular momentum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from construct import (ConstructionResult, Grid, LevelPair, as_output, potential_at, regularized,
                       sample_derivatives, cell_integrals, normalize_log_samples, tail_fraction)
from errors import ConfigError, DegenerateSpec, NonNormalizable, RegularityError
from exprlang import ArrayLike, ParsedFunction, locate_poles, locate_roots

logger = logging.getLogger(__name__)

ORIGIN_EXPONENT_MIN = 0.5


def radial_coupling(l1: int, l2: int) -> float:
    if l1 < 0 or l2 < 0:
        raise ConfigError(f"angular momenta must be non-negative, got {l1}, {l2}", l1=l1, l2=l2)
    return float((l2 - l1) * (1 + l1 + l2))


@dataclass(frozen=True)
class RadialSpec:
    l1: int
    l2: int
    levels: LevelPair

    def __post_init__(self):
        for name in ("l1", "l2"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value}", **{name: value})
        if self.levels.deltaE == 0.0 and self.l1 == self.l2:
            raise DegenerateSpec("deltaE = 0 needs different angular momenta", l1=self.l1, l2=self.l2)

    @property
    def lambdaCoupling(self) -> float:
        return radial_coupling(self.l1, self.l2)

    def centrifugal(self, which: int, r: ArrayLike) -> ArrayLike:
        l = self.l1 if which == 1 else self.l2
        return l * (l + 1) / np.asarray(r, dtype=float) ** 2

    def to_dict(self) -> dict[str, float]:
        return {"l1": self.l1, "l2": self.l2, "lambda": self.lambdaCoupling, **self.levels.to_dict()}


def _check_radius(r: ArrayLike) -> None:
    if np.any(np.asarray(r, dtype=float) <= 0):
        raise ValueError("the radial coordinate must be positive")


def radial_log_derivative(xi: ParsedFunction, spec: RadialSpec, r: ArrayLike) -> ArrayLike:
    _check_radius(r)
    f, d1, d2 = sample_derivatives(xi, r, (0, 1, 2))
    rs = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        values = (d2 + (spec.levels.deltaE - spec.lambdaCoupling / rs ** 2) * f) / (2.0 * d1)
    return as_output(r, values)


def radial_potential(xi: ParsedFunction, spec: RadialSpec, r: ArrayLike) -> ArrayLike:
    """U(r) = U0 + lambda corrections, U0 being the one-dimensional potential of xi.

    With lambda = 0 only -l(l+1)/r^2 survives on top of U0; with dE = 0, U0
    reduces to E1 - [xi]/2.
    """
    _check_radius(r)
    lam, levels = spec.lambdaCoupling, spec.levels
    centrifugal = spec.l1 * (spec.l1 + 1)

    def naive(t):
        t = np.asarray(t, dtype=float)
        f, d1, d2 = sample_derivatives(xi, t, (0, 1, 2))
        base = np.asarray(potential_at(xi, levels.E1, levels.deltaE, t))
        ratio = f / d1
        return (base
                + lam ** 2 * ratio ** 2 / (4.0 * t ** 4)
                - lam * ratio / t ** 3
                - lam * ratio * d2 / (t ** 2 * d1)
                - lam * levels.deltaE * ratio ** 2 / (2.0 * t ** 2)
                + (lam - 2.0 * centrifugal) / (2.0 * t ** 2))

    return regularized(naive, r, ())


def synthesize_radial(xi: ParsedFunction, spec: RadialSpec, grid: Grid,
                      scan_points: int = 2048, tail_limit: float = 0.01) -> ConstructionResult:
    """u1 = exp(-chi) and u2 = xi u1 on a grid r in [h, R].

    Only monotone xi without poles on the grid are accepted, and both states
    must vanish at the origin.
    """
    if grid.a <= 0:
        raise ValueError("radial grids start at r > 0")
    interval = (grid.a, grid.b)
    poles = locate_poles(xi, interval, scan_points)
    criticals = locate_roots(xi.derivative_function(), interval, scan_points)
    if len(poles) or len(criticals):
        raise RegularityError(
            "radial synthesis needs xi without poles or critical points on the grid",
            poles=poles.locations, criticals=criticals.locations,
        )
    points = grid.points
    with np.errstate(all="ignore"):
        chi = np.concatenate([[0.0], np.cumsum(cell_integrals(lambda t: radial_log_derivative(xi, spec, t), points, ()))])
        xi_values = np.asarray(xi(points), dtype=float)
        u1, peak1, norm1 = normalize_log_samples(points, -chi, np.ones_like(points))
        u2, peak2, norm2 = normalize_log_samples(points, np.log(np.abs(xi_values)) - chi, np.sign(xi_values))

    outer = points > 0.5 * (grid.a + grid.b)
    for which, u in ((1, u1), (2, u2)):
        tail = tail_fraction(points, u, outer)
        if tail > tail_limit:
            raise NonNormalizable(f"u{which} keeps {tail:.3g} of its probability in the outer half",
                                  state=which, tail=tail)
        exponent = _origin_exponent(points, u)
        if not exponent >= ORIGIN_EXPONENT_MIN:
            raise RegularityError(f"u{which} does not vanish at the origin (local power {exponent:.3g})",
                                  state=which, exponent=exponent)

    U = np.asarray(radial_potential(xi, spec, points), dtype=float)
    W = np.asarray(radial_log_derivative(xi, spec, points), dtype=float)
    missing = np.full_like(points, np.nan)
    logger.info("radial synthesis l1=%d l2=%d on [%g, %g]", spec.l1, spec.l2, grid.a, grid.b)
    return ConstructionResult(
        grid=grid, levels=spec.levels, U=U, psi1=u1, psi2=u2, chi_prime=W, W=W,
        Wplus=missing, Wminus=missing.copy(),
        psi2_scale=float(np.exp(peak2 - peak1) * norm2 / norm1), xi=xi,
    )


def _origin_exponent(points: npt.NDArray[np.float64], u: npt.NDArray[np.float64]) -> float:
    """Local power p in u ~ r^p from the first two samples."""
    with np.errstate(all="ignore"):
        return float(np.log(abs(u[1]) / abs(u[0])) / np.log(points[1] / points[0]))


def channel_residual(result: ConstructionResult, spec: RadialSpec, which: int) -> float:
    """max |-u'' + (U + l(l+1)/r^2 - E) u| / max|u| over interior points."""
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    u = result.psi1 if which == 1 else result.psi2
    energy = spec.levels.E1 if which == 1 else spec.levels.E2
    points, h = result.grid.points, result.grid.h
    effective = result.U + np.asarray(spec.centrifugal(which, points))
    second = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2
    residual = np.abs(-second + (effective[1:-1] - energy) * u[1:-1])
    return float(np.nanmax(residual) / np.max(np.abs(u)))
