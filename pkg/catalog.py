"""Built-in, parameterized two-level constructions.

Each entry turns a parameter mapping into ready-to-run inputs (xi, levels,
expected node counts, a default domain) and, where one is known, a closed-form
reference potential for regression against the generic pipeline.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Iterator, Mapping

import numpy as np

from config import load_defaults
from construct import LevelPair
from deform import CanonicalDeformParams, apply_mobius, canonical_from_beta
from errors import ValidityError
from exprlang import ArrayLike, ParsedFunction, to_text

logger = logging.getLogger(__name__)


def _num(value: float) -> str:
    text = format(float(value), ".17g")
    return f"({text})" if value < 0 else text


@dataclass(frozen=True)
class Instance:
    name: str
    params: Mapping[str, float]
    xi: ParsedFunction
    levels: LevelPair
    expected: tuple[int, int]
    domain: tuple[float, float]
    eta: ParsedFunction | None = None
    canonical: CanonicalDeformParams | None = None
    wplus: ParsedFunction | None = None
    anchor: float = 0.0
    eta_scale: float = 1.0

    def __iter__(self) -> Iterator[Any]:
        return iter((self.xi, self.levels, self.expected))

    def to_dict(self) -> dict[str, Any]:
        out = {
            "name": self.name,
            "params": dict(self.params),
            "xi": self.xi.describe(),
            "levels": self.levels.to_dict(),
            "expected": list(self.expected),
            "domain": list(self.domain),
        }
        if self.eta is not None:
            out["eta"] = self.eta.describe()
        if self.canonical is not None:
            out["canonical"] = self.canonical.to_dict()
        if self.wplus is not None:
            out["wplus"] = self.wplus.describe()
        return out


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    generator: str
    predicate: str
    build: Callable[[Mapping[str, float]], Instance]
    violated: Callable[[Mapping[str, float]], bool] = lambda p: False
    reference: Callable[[Mapping[str, float], np.ndarray], np.ndarray] | None = None
    constant_convention: str = "none"


def _deformed(name: str, params, eta: ParsedFunction, canonical: CanonicalDeformParams,
              levels: LevelPair, expected, domain, **extra) -> Instance:
    expression = apply_mobius(eta, canonical.to_mobius())
    xi = ParsedFunction(expression, to_text(expression))
    return Instance(name, dict(params), xi, levels, expected, domain, eta=eta, canonical=canonical, **extra)


# ------------------------------------------------------------------ harmonic

def _harmonic(p) -> Instance:
    levels = LevelPair(p["e1"], p["e2"])
    half_width = max(4.0, math.sqrt(128.0 / levels.deltaE))
    return Instance("harmonic", dict(p), ParsedFunction.from_text("x"), levels, (0, 1), (-half_width, half_width))


def _harmonic_reference(p, x):
    dE = p["e2"] - p["e1"]
    return p["e1"] - 0.5 * dE + 0.25 * dE ** 2 * x ** 2


def _harmonic13(p) -> Instance:
    return Instance("harmonic13", dict(p), ParsedFunction.from_text("2*x^2-3"),
                    LevelPair.from_gap(p["e1"], 4.0), (1, 3), (-8.0, 8.0))


# ------------------------------------------------------------------- quartic

def quartic_gap(x0: float, x1: float) -> float:
    return 4.0 * x0 ** 2 / x1 ** 4


def _quartic(p) -> Instance:
    x0, x1 = p["x0"], p["x1"]
    xi = ParsedFunction.from_text(f"x^4+{_num(2.0 * x0 ** 2)}*x^2-{_num(x1 ** 4)}")
    nu = x0 ** 2 / (2.0 * x1 ** 4)
    half_width = math.sqrt(60.0 / nu)
    return Instance("quartic", dict(p), xi, LevelPair.from_gap(p["e1"], quartic_gap(x0, x1)), (0, 2),
                    (-half_width, half_width))


def quartic_coefficients(x0: float, x1: float) -> tuple[float, float, float]:
    ratio = x0 ** 4 / x1 ** 4
    a0 = 2.0 * x0 ** 2 * (2.0 + ratio)
    a1 = (3.0 * x1 ** 4 + x0 ** 4) * (5.0 - ratio)
    a2 = -(3.0 * x1 ** 4 + x0 ** 4) * x0 ** 2 * (7.0 + ratio)
    return a0, a1, a2


def _quartic_reference(p, x):
    x0, x1 = p["x0"], p["x1"]
    a0, a1, a2 = quartic_coefficients(x0, x1)
    s = x ** 2 + x0 ** 2
    return p["e1"] + x ** 2 * x0 ** 4 / (4.0 * x1 ** 8) + (a0 + a1 / s + a2 / s ** 2) / (4.0 * x1 ** 4)


# ------------------------------------------------------------------- decatic

def decatic_gap(mu: float, omega: float) -> float:
    return 4.0 * math.sqrt(4.0 * mu ** 6 + 4.0 * omega * mu ** 3 + 9.0) / mu


def decatic_internals(mu: float, omega: float) -> dict[str, float]:
    """Parameters of the quartic base function in the rescaled frame (a = 1, lambda = 1)."""
    V0 = -3.0 * omega / (4.0 * mu) - mu ** 2 / 2.0
    R = 16.0 * mu ** 4 + 16.0 * omega * mu + 36.0 / mu ** 2
    beta = 8.0 * omega
    return {
        "a": 1.0, "lambda": 1.0, "x0": math.sqrt(mu), "V0": V0,
        "beta": beta, "deltaBar": 0.0, "gamma": R / beta, "deltaE": decatic_gap(mu, omega),
    }


def _decatic(p) -> Instance:
    mu, omega = p["mu"], p["omega"]
    internals = decatic_internals(mu, omega)
    eta = ParsedFunction.from_text(f"{_num(internals['V0'] + mu ** 2)}-(x^2-{_num(mu)})^2")
    deltaE = internals["deltaE"]
    canonical = canonical_from_beta(internals["beta"], 0.0, deltaE)
    levels = LevelPair.from_gap(p["mean"] - 0.5 * deltaE, deltaE)
    expected = (0, 4) if omega > 0 else (2, 4)
    half_width = 3.0 + math.sqrt(mu)
    return _deformed("decatic", p, eta, canonical, levels, expected, (-half_width, half_width))


def _decatic_reference(p, y):
    mu, w = p["mu"], p["omega"]
    return (y ** 10 - 6.0 * mu * y ** 8 + (13.0 * mu ** 2 + 3.0 * w / mu) * y ** 6
            - (12.0 * mu ** 3 + 22.0 * w) * y ** 4 + (4.0 * mu ** 4 + 31.0 * mu * w + 9.0 / (4.0 * mu ** 2)) * y ** 2
            + p["mean"] - 7.5 / mu - 6.0 * w * mu ** 2)


# -------------------------------------------------------------------- sextic

def _sextic(p) -> Instance:
    a, b, beta = p["a"], p["b"], p["beta"]
    x0 = math.sqrt(a / b)
    eta = ParsedFunction.from_text(f"x*{_num(x0)}/sqrt(x^2+{_num(x0 ** 2)})")
    wplus = ParsedFunction.from_text(f"{_num(a)}*x+{_num(b)}*x^3")
    kappa = b - abs(beta) / x0
    half_width = max(4.0, (240.0 / kappa) ** 0.25)
    return _deformed("sextic", p, eta, canonical_from_beta(beta, a, a), LevelPair.from_gap(p["e1"], a), (0, 1),
                     (-half_width, half_width), wplus=wplus, anchor=0.0, eta_scale=1.0)


def _sextic_reference(p, x):
    a, b, beta = p["a"], p["b"], p["beta"]
    x0 = math.sqrt(a / b)
    r = np.sqrt(x ** 2 + x0 ** 2)
    deformation = (beta * x / x0) * (-x0 ** 2 / r + 3.0 * r + 0.5 * a * r ** 3 - a * r ** 5 / (2.0 * x0 ** 2))
    u = (0.25 * b ** 2 * x ** 6 + 0.5 * a * b * x ** 4 + beta ** 2 * x ** 4 * r ** 2 / (4.0 * x0 ** 2)
         + 0.25 * (a ** 2 - 12.0 * b) * x ** 2 - 0.5 * a + 0.75 / r ** 2 + 0.75 * x0 ** 2 / r ** 4)
    return p["e1"] + deformation + u


def sextic_log_derivative(p, x):
    """rho' of the sextic entry in closed form: W+/2 - 3x/(2r^2) - beta x^2 r/(2 x0)."""
    a, b, beta = p["a"], p["b"], p["beta"]
    x0 = math.sqrt(a / b)
    r2 = x ** 2 + x0 ** 2
    return 0.5 * (a * x + b * x ** 3) - 1.5 * x / r2 - beta * x ** 2 * np.sqrt(r2) / (2.0 * x0)


# ---------------------------------------------------------------- hyperbolic

def _hyperbolic(p) -> Instance:
    delta, x0, beta = p["delta"], p["x0"], p["beta"]
    eta = ParsedFunction.from_text(f"sinh((x-{_num(x0)})/2)/cosh((x+{_num(x0)})/2)")
    amplitude = delta / math.cosh(x0)
    wplus = ParsedFunction.from_text(f"{_num(amplitude)}*(sinh(x)-{_num(math.sinh(x0))})")
    kappa = min(delta - beta * math.exp(-x0), delta + beta * math.exp(x0))
    half_width = abs(x0) + math.log(160.0 * math.cosh(x0) / kappa) + 1.0
    return _deformed("hyperbolic", p, eta, canonical_from_beta(beta, delta, delta),
                     LevelPair.from_gap(p["e1"], delta), (0, 1), (-half_width, half_width),
                     wplus=wplus, anchor=x0, eta_scale=1.0 / (2.0 * math.cosh(x0)))


def _hyperbolic_reference(p, x):
    delta, x0, beta = p["delta"], p["x0"], p["beta"]
    ch0 = math.cosh(x0)
    spread = np.sinh(x) - math.sinh(x0)
    u0 = delta ** 2 * spread ** 2 / (4.0 * ch0 ** 2) - delta * (2.0 * np.cosh(x) - ch0) / (2.0 * ch0) + 0.25
    half = np.sinh((x - x0) / 2.0)
    deformation = (beta * half / (ch0 * np.cosh((x + x0) / 2.0))
                   * (np.cosh(x) + ch0 - delta * spread ** 2 / (2.0 * ch0)))
    return p["e1"] + u0 + deformation + beta ** 2 * half ** 4 / ch0 ** 2


def hyperbolic_log_derivative(p, x):
    """rho' of the hyperbolic entry: alpha' - tanh((x + x0)/2)/2."""
    delta, x0, beta = p["delta"], p["x0"], p["beta"]
    alpha_prime = (delta * np.sinh(x) - beta * np.cosh(x - x0) + beta - delta * math.sinh(x0)) / (2.0 * math.cosh(x0))
    return alpha_prime - 0.5 * np.tanh((x + x0) / 2.0)


# ------------------------------------------------------------------ registry

ENTRIES: dict[str, CatalogEntry] = {
    entry.name: entry for entry in (
        CatalogEntry("harmonic", "x", "e2 > e1", _harmonic,
                     violated=lambda p: not p["e2"] > p["e1"], reference=_harmonic_reference),
        CatalogEntry("harmonic13", "2*x^2-3", "none", _harmonic13,
                     reference=lambda p, x: x ** 2 + p["e1"] - 3.0),
        CatalogEntry("quartic", "x^4+2*x0^2*x^2-x1^4", "x0 != 0 and x1 != 0", _quartic,
                     violated=lambda p: p["x0"] == 0 or p["x1"] == 0, reference=_quartic_reference),
        CatalogEntry("decatic", "mobius(V0+mu^2-(x^2-mu)^2; beta=8*omega, dbar=0)",
                     "mu > 0 and omega in {1, -1}", _decatic,
                     violated=lambda p: not p["mu"] > 0 or p["omega"] not in (1.0, -1.0),
                     reference=_decatic_reference,
                     constant_convention="levels are mean -/+ dE/2; the reference carries the mean"),
        CatalogEntry("sextic", "W+ = a*x+b*x^3", "a > 0 and b > 0 and beta^2 < a*b", _sextic,
                     violated=lambda p: not (p["a"] > 0 and p["b"] > 0 and p["beta"] ** 2 < p["a"] * p["b"]),
                     reference=_sextic_reference,
                     constant_convention="reference shifted by e1"),
        CatalogEntry("hyperbolic", "W+ = A*(sinh(x)-sinh(x0)), A = delta/cosh(x0)",
                     "delta > 0 and -delta*exp(-x0) < beta < delta*exp(x0)", _hyperbolic,
                     violated=lambda p: not (p["delta"] > 0
                                             and -p["delta"] * math.exp(-p["x0"]) < p["beta"]
                                             < p["delta"] * math.exp(p["x0"])),
                     reference=_hyperbolic_reference,
                     constant_convention="(E1+E2)/2 - delta/2 equals e1"),
    )
}


@lru_cache(maxsize=1)
def _schemas() -> dict[str, Any]:
    return load_defaults()["catalog"]


def parameter_schema(name: str) -> dict[str, dict[str, Any]]:
    entry = get_entry(name)
    return dict(_schemas().get(entry.name, {}).get("params", {}))


def get_entry(name: str) -> CatalogEntry:
    try:
        return ENTRIES[name]
    except KeyError:
        raise ValidityError(f"unknown catalog entry {name!r}", entry=name, known=sorted(ENTRIES)) from None


def resolve_params(name: str, params: Mapping[str, float] | None = None) -> dict[str, float]:
    """Defaults from the schema overlaid with ``params``; validity is checked."""
    entry = get_entry(name)
    schema = parameter_schema(name)
    merged = {key: float(spec["default"]) for key, spec in schema.items()}
    for key, value in (params or {}).items():
        if key not in schema:
            raise ValidityError(f"{name} has no parameter {key!r}", entry=name, parameter=key,
                                known=sorted(schema))
        merged[key] = float(value)
    if entry.violated(merged):
        raise ValidityError(f"{name} parameters violate: {entry.predicate}", entry=name,
                            predicate=entry.predicate, params=merged)
    return merged


def instantiate_entry(name: str, params: Mapping[str, float] | None = None) -> Instance:
    merged = resolve_params(name, params)
    instance = get_entry(name).build(merged)
    logger.debug("instantiated %s with %s: xi=%s", name, merged, instance.xi.describe())
    return instance


def reference_values(name: str, params: Mapping[str, float] | None, x: ArrayLike) -> ArrayLike | None:
    entry = get_entry(name)
    if entry.reference is None:
        return None
    merged = resolve_params(name, params)
    values = entry.reference(merged, np.asarray(x, dtype=float))
    return float(values) if np.ndim(x) == 0 else np.asarray(values, dtype=float)


def list_entries() -> list[dict[str, Any]]:
    return [
        {
            "name": entry.name,
            "description": _schemas().get(entry.name, {}).get("description", ""),
            "generator": entry.generator,
            "validity": entry.predicate,
            "params": parameter_schema(entry.name),
            "reference": entry.reference is not None,
            "constant_convention": entry.constant_convention,
        }
        for entry in ENTRIES.values()
    ]
