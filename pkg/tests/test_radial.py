import numpy as np
import pytest
import sympy
from scipy.integrate import trapezoid

from construct import Grid, LevelPair, potential_at
from errors import DegenerateSpec, RegularityError
from exprlang import ParsedFunction
from radial import (RadialSpec, channel_residual, radial_coupling, radial_log_derivative, radial_potential,
                    synthesize_radial)


def _oscillator_spec():
    return RadialSpec(0, 1, LevelPair(3.0, 5.0))


def test_coupling():
    assert radial_coupling(0, 1) == 2.0
    assert radial_coupling(2, 1) == -4.0
    assert radial_coupling(1, 1) == 0.0
    with pytest.raises(ValueError):
        radial_coupling(-1, 0)


def test_degenerate_spec_needs_distinct_momenta():
    with pytest.raises(DegenerateSpec):
        RadialSpec(1, 1, LevelPair(2.0, 2.0))
    assert RadialSpec(0, 2, LevelPair(2.0, 2.0)).lambdaCoupling == 6.0


def test_oscillator_potential():
    r = np.linspace(0.1, 6.0, 60)
    xi = ParsedFunction.from_text("x")
    spec = _oscillator_spec()
    assert np.allclose(radial_potential(xi, spec, r), r ** 2, atol=1e-10)
    assert np.allclose(radial_log_derivative(xi, spec, r), r - 1.0 / r, atol=1e-12)


def test_zero_coupling_reduces_to_line_potential(rng):
    xi = ParsedFunction.from_text("x^3+x")
    spec = RadialSpec(1, 1, LevelPair(0.5, 2.0))
    r = rng.uniform(0.2, 3.0, 30)
    expected = np.asarray(potential_at(xi, 0.5, 1.5, r)) - 2.0 / r ** 2
    assert np.allclose(radial_potential(xi, spec, r), expected, rtol=1e-9, atol=1e-9)


def test_radius_must_be_positive():
    with pytest.raises(ValueError):
        radial_potential(ParsedFunction.from_text("x"), _oscillator_spec(), np.array([0.0, 1.0]))


def test_oscillator_channels():
    R, n = 8.0, 4000
    grid = Grid.uniform(R / n, R, n)
    assert grid.h == pytest.approx(0.002)
    spec = _oscillator_spec()
    result = synthesize_radial(ParsedFunction.from_text("x"), spec, grid)
    r = grid.points
    expected = r * np.exp(-r ** 2 / 2.0)
    expected /= np.sqrt(trapezoid(expected ** 2, r))
    assert np.max(np.abs(result.psi1 - expected)) < 1e-6
    for which in (1, 2):
        residual = channel_residual(result, spec, which)
        assert residual < 1e-4, f"u{which} residual {residual:.3g}"


def test_radial_filters():
    spec = _oscillator_spec()
    grid = Grid.uniform(0.01, 6.0, 600)
    with pytest.raises(RegularityError):
        synthesize_radial(ParsedFunction.from_text("(x-2)^2+1"), spec, grid)
    with pytest.raises(RegularityError):
        synthesize_radial(ParsedFunction.from_text("1/(x-3)"), spec, grid)
    with pytest.raises(ValueError):
        synthesize_radial(ParsedFunction.from_text("x"), spec, Grid.uniform(-1.0, 1.0, 11))


def test_degenerate_potential_matches_sympy(rng):
    r = sympy.Symbol("r", positive=True)
    xi_expr = r ** 3 + r
    spec = RadialSpec(0, 2, LevelPair(2.0, 2.0))
    lam = spec.lambdaCoupling
    chi1 = (sympy.diff(xi_expr, r, 2) - lam / r ** 2 * xi_expr) / (2 * sympy.diff(xi_expr, r))
    reference = sympy.lambdify(r, 2.0 + chi1 ** 2 - sympy.diff(chi1, r), "numpy")
    points = rng.uniform(0.2, 3.0, 40)
    got = radial_potential(ParsedFunction.from_text("x^3+x"), spec, points)
    assert np.allclose(got, reference(points), rtol=1e-9, atol=1e-9)


def test_degenerate_coulomb_pair():
    # 2p (l=1) and 2s (l=0) share E = -1 in U = -4/r
    xi = ParsedFunction.from_text("1-1/x")
    spec = RadialSpec(1, 0, LevelPair(-1.0, -1.0))
    assert spec.lambdaCoupling == -2.0
    R, n = 30.0, 6000
    grid = Grid.uniform(R / n, R, n)
    r = grid.points
    assert np.allclose(radial_potential(xi, spec, r), -4.0 / r, rtol=1e-10, atol=1e-10)
    assert np.allclose(radial_log_derivative(xi, spec, r), 1.0 - 2.0 / r, atol=1e-10)

    result = synthesize_radial(xi, spec, grid)
    expected = r ** 2 * np.exp(-r)
    expected /= np.sqrt(trapezoid(expected ** 2, r))
    assert np.max(np.abs(result.psi1 - expected)) < 1e-6
    for which in (1, 2):
        residual = channel_residual(result, spec, which)
        assert residual < 1e-4, f"u{which} residual {residual:.3g}"
