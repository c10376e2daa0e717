"""Linear-fractional deformations xi = (c2 eta + d2)/(c1 eta + d1) of a base function.

All members share the two energy levels of the base construction. In the
canonical parameterization (c1 = c2 = 2 beta, d1 = -dbar - dE, d2 = -dbar + dE)
the deformed potential is written through

    Y = beta eta^2 - dbar eta - gamma,    gamma = (dE^2 - dbar^2) / (4 beta)

as U = E1 + dE/2 - dbar + 2 beta eta - [eta]/2 + Y^2/(4 eta'^2) - eta'' Y / eta'^2.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from construct import LevelPair, as_output, sample_derivatives, regularized, require_gap
from errors import DegenerateMobius, InconsistentLevels
from exprlang import ArrayLike, Const, Expression, ParsedFunction, add, div, locate_roots, mul

logger = logging.getLogger(__name__)

DETERMINANT_TOL = 1e-12
TIE_TOL = 1e-9


@dataclass(frozen=True)
class MobiusParams:
    c1: float
    c2: float
    d1: float
    d2: float

    @property
    def determinant(self) -> float:
        return self.c1 * self.d2 - self.c2 * self.d1

    def check(self) -> None:
        size = max(abs(self.c1 * self.d2), abs(self.c2 * self.d1))
        if abs(self.determinant) <= DETERMINANT_TOL * size:
            raise DegenerateMobius(f"c1 d2 - c2 d1 = {self.determinant:.3g}; the map is constant",
                                   c1=self.c1, c2=self.c2, d1=self.d1, d2=self.d2)

    def to_dict(self) -> dict[str, float]:
        return {"c1": self.c1, "c2": self.c2, "d1": self.d1, "d2": self.d2}


@dataclass(frozen=True)
class CanonicalDeformParams:
    beta: float
    deltaBar: float
    gamma: float
    deltaE: float

    def __post_init__(self):
        if self.beta != 0.0:
            expected = (self.deltaE ** 2 - self.deltaBar ** 2) / (4.0 * self.beta)
            if abs(self.gamma - expected) > TIE_TOL * max(1.0, abs(expected)):
                raise InconsistentLevels(f"gamma={self.gamma} but the level tie requires {expected}",
                                         gamma=self.gamma, expected=expected)
        elif self.gamma != 0.0:
            raise InconsistentLevels("gamma must vanish when beta = 0", gamma=self.gamma)

    def Y(self, eta: ArrayLike) -> ArrayLike:
        return self.beta * eta ** 2 - self.deltaBar * eta - self.gamma

    def to_mobius(self) -> MobiusParams:
        """An equivalent map; the representative is fixed up to an overall factor of xi."""
        dE, dbar, beta = self.deltaE, self.deltaBar, self.beta
        if self.gamma == 0.0 and dbar == dE:
            return MobiusParams(c1=-beta / dE, c2=1.0, d1=1.0, d2=0.0)
        if self.gamma == 0.0 and dbar == -dE:
            return MobiusParams(c1=1.0, c2=beta / dE, d1=0.0, d2=1.0)
        if beta == 0.0:
            raise DegenerateMobius(f"no linear-fractional map for beta=0 and dbar={dbar} != +-dE",
                                   deltaBar=dbar, deltaE=dE)
        return MobiusParams(c1=2.0 * beta, c2=2.0 * beta, d1=-dbar - dE, d2=-dbar + dE)

    def to_dict(self) -> dict[str, float]:
        return {"beta": self.beta, "deltaBar": self.deltaBar, "gamma": self.gamma, "deltaE": self.deltaE}


def apply_mobius(eta: ParsedFunction, p: MobiusParams) -> Expression:
    p.check()
    numerator = add(mul(Const(p.c2), eta.base), Const(p.d2))
    denominator = add(mul(Const(p.c1), eta.base), Const(p.d1))
    return div(numerator, denominator)


def canonical_params(c: float, d1: float, d2: float, deltaE: float) -> CanonicalDeformParams:
    """Canonical (beta, dbar, gamma) for c1 = c2 = c; requires d2 - d1 = 2 dE."""
    if c == 0.0:
        raise ValueError("c must be nonzero")
    if abs((d2 - d1) - 2.0 * deltaE) > TIE_TOL * max(1.0, abs(deltaE)):
        raise InconsistentLevels(f"d2 - d1 = {d2 - d1} does not equal 2 dE = {2.0 * deltaE}",
                                 d1=d1, d2=d2, deltaE=deltaE)
    beta = 0.5 * c
    deltaBar = -0.5 * (d1 + d2)
    return CanonicalDeformParams(beta, deltaBar, (deltaE ** 2 - deltaBar ** 2) / (4.0 * beta), deltaE)


def canonical_from_beta(beta: float, deltaBar: float, deltaE: float) -> CanonicalDeformParams:
    if beta == 0.0:
        if abs(deltaBar) != abs(deltaE):
            raise InconsistentLevels("gamma is undefined for beta = 0 unless dbar = +-dE",
                                     deltaBar=deltaBar, deltaE=deltaE)
        return CanonicalDeformParams(0.0, deltaBar, 0.0, deltaE)
    return CanonicalDeformParams(beta, deltaBar, (deltaE ** 2 - deltaBar ** 2) / (4.0 * beta), deltaE)


def phi_components(eta: ParsedFunction, p: MobiusParams, x: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """Phi1 = c1 eta + d1 and Phi2 = c2 eta + d2; psi_i = Phi_i exp(-rho)."""
    values = np.asarray(eta(x), dtype=float)
    return as_output(x, p.c1 * values + p.d1), as_output(x, p.c2 * values + p.d2)


def deformed_potential(eta: ParsedFunction, levels: LevelPair, p: CanonicalDeformParams, x: ArrayLike,
                       special_points: Iterable[float] = ()) -> ArrayLike:
    require_gap(levels)
    if abs(levels.deltaE - p.deltaE) > TIE_TOL * max(1.0, levels.deltaE):
        raise InconsistentLevels(f"levels have gap {levels.deltaE} but the deformation was built for {p.deltaE}",
                                 levels_gap=levels.deltaE, params_gap=p.deltaE)

    def naive(t):
        f, d1, d2, d3 = sample_derivatives(eta, t, (0, 1, 2, 3))
        Y = p.Y(f)
        bracket = d3 / d1 - 1.5 * (d2 / d1) ** 2
        return (levels.E1 + 0.5 * levels.deltaE - p.deltaBar + 2.0 * p.beta * f - 0.5 * bracket
                + 0.25 * Y ** 2 / d1 ** 2 - d2 * Y / d1 ** 2)

    return regularized(naive, x, special_points)


def eta_from_wplus(wplus: ParsedFunction, delta: float, x: ArrayLike, anchor: float = 0.0,
                   eta_scale: float = 1.0, zeros: Sequence[float] | None = None) -> ArrayLike:
    """eta = exp(delta * int dx / W+), fixed by its behaviour at ``anchor``.

    Each zero w of W+ gives eta a simple zero; the factor (x - w) is pulled out
    and the remaining integrand delta/W+ - sum 1/(t - w) is smooth.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if zeros is None:
        lo, hi = min(anchor, float(xs.min())) - 1.0, max(anchor, float(xs.max())) + 1.0
        zeros = locate_roots(wplus, (lo, hi)).locations
    w = np.asarray(list(zeros), dtype=float)

    def integrand(t):
        t = np.asarray(t, dtype=float)
        correction = np.sum(1.0 / (t[..., None] - w), axis=-1) if w.size else 0.0
        return delta / np.asarray(wplus(t)) - correction

    def smooth(t: float) -> float:
        return float(regularized(integrand, t, w))

    order = np.argsort(xs)
    values = np.empty_like(xs)
    previous, running = anchor, 0.0
    for i in order:
        piece, _ = integrate.quad(smooth, previous, xs[i], limit=200, epsabs=1e-13, epsrel=1e-12)
        running += piece
        previous = xs[i]
        factor = np.prod(xs[i] - w) if w.size else 1.0
        values[i] = eta_scale * factor * np.exp(running)
    return as_output(x, values)


def deformed_log_derivative(wplus: ParsedFunction, delta: float, p: CanonicalDeformParams, x: ArrayLike,
                            anchor: float = 0.0, eta_scale: float = 1.0,
                            zeros: Sequence[float] | None = None) -> ArrayLike:
    """rho' = (eta'' - Y)/(2 eta') with eta' = delta eta / W+.

    Expanded this reads (delta - W+')/(2 W+) - beta eta W+/(2 delta)
    + dbar W+/(2 delta) + gamma W+/(2 delta eta).
    """
    wp, dwp = sample_derivatives(wplus, x, (0, 1))
    with np.errstate(all="ignore"):
        values = (delta - dwp) / (2.0 * wp) + p.deltaBar * wp / (2.0 * delta)
        if p.beta != 0.0 or p.gamma != 0.0:
            eta = np.asarray(eta_from_wplus(wplus, delta, x, anchor, eta_scale, zeros), dtype=float)
            values = values - p.beta * eta * wp / (2.0 * delta) + p.gamma * wp / (2.0 * delta * eta)
    return as_output(x, np.asarray(values, dtype=float))
