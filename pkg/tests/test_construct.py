import math

import numpy as np
import pytest
import sympy

from catalog import instantiate_entry, reference_values
from classify import analyze_singularities
from conftest import grid_with_step, sign_changes
from construct import (Grid, LevelPair, PotentialForm, build_construction, check_wplus_zeros, chi_prime,
                       invert, potential, potential_at, potential_from_wplus, regularized, residual_check,
                       schwarzian, superpotential_triplet, synthesize_wavefunctions, triplet_from_wplus)
from deform import MobiusParams, apply_mobius
from errors import DegenerateSpec, RegularityError
from exprlang import ParsedFunction, to_text


def _specials(xi, interval):
    report = analyze_singularities(xi, 1.0, interval, strict=False)
    return sorted(report.poles.locations + [c.location for c in report.criticals])


def _away_from(points, specials, margin=0.05):
    if not specials:
        return points
    distance = np.min(np.abs(points[:, None] - np.asarray(specials)[None, :]), axis=1)
    return points[distance > margin]


def test_levels_and_grid_contracts():
    with pytest.raises(ValueError):
        LevelPair(2.0, 1.0)
    with pytest.raises(ValueError):
        LevelPair(float("nan"), 1.0)
    assert LevelPair.from_gap(1.0, 2.0).E2 == 3.0
    with pytest.raises(DegenerateSpec):
        potential(ParsedFunction.from_text("x"), LevelPair(1.0, 1.0), 0.5)
    grid = Grid.uniform(-1.0, 1.0, 5)
    assert grid.h == 0.5
    assert np.allclose(grid.subgrid().points, [-1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 1.0, 3.0]))


def test_harmonic_potential_is_exact(harmonic, harmonic_grid):
    xi, levels = harmonic
    U = potential(xi, levels, harmonic_grid.points)
    assert np.max(np.abs(U - harmonic_grid.points ** 2)) < 1e-9


def test_potential_matches_sympy_oracle(rng):
    x = sympy.Symbol("x")
    text = "x^3+3*x+1"
    f = sympy.sympify(text.replace("^", "**"))
    e1, dE = 0.7, 1.3
    d1, d2, d3 = (sympy.diff(f, x, k) for k in (1, 2, 3))
    chi1 = (d2 + dE * f) / (2 * d1)
    reference = sympy.lambdify(x, e1 + chi1 ** 2 - sympy.diff(chi1, x), "numpy")
    points = rng.uniform(-3.0, 3.0, 40)
    got = potential_at(ParsedFunction.from_text(text), e1, dE, points)
    assert np.allclose(got, reference(points), rtol=1e-10, atol=1e-10)


def test_three_forms_agree(instance, rng):
    xi, levels, _ = instance
    lo, hi = instance.domain
    points = _away_from(rng.uniform(0.5 * lo, 0.5 * hi, 60), _specials(xi, (lo, hi)))
    values = {form: np.asarray(potential_at(xi, levels.E1, levels.deltaE, points, form)) for form in PotentialForm}
    scale = np.maximum(1.0, np.abs(values[PotentialForm.A]))
    for form in (PotentialForm.B, PotentialForm.C):
        error = np.max(np.abs(values[form] - values[PotentialForm.A]) / scale)
        assert error < 1e-9, f"{instance.name}: form {form.value} differs by {error:.3g}"


def test_scaling_and_inversion_symmetries(rng):
    xi = ParsedFunction.from_text("exp(x)+x")
    scaled = ParsedFunction.from_text("-3.5*(exp(x)+x)")
    points = _away_from(rng.uniform(-2.0, 2.0, 30), [-0.5671])
    e1, dE = -0.4, 1.7
    base = np.asarray(potential_at(xi, e1, dE, points))
    assert np.allclose(potential_at(scaled, e1, dE, points), base, rtol=1e-10, atol=1e-10)
    swapped = potential_at(invert(xi), e1 + dE, -dE, points)
    assert np.allclose(swapped, base, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("a", [1e-6, 1e-3, 1e3])
def test_construction_ignores_the_size_of_xi(instance, a):
    scaled = ParsedFunction.from_text(f"{a!r}*({instance.xi.describe()})")
    base = build_construction(instance.xi, instance.levels, instance.domain, 2001)
    result = build_construction(scaled, instance.levels, instance.domain, 2001)
    assert (result.report.N1, result.report.N2) == (base.report.N1, base.report.N2)
    assert result.report.poles.locations == pytest.approx(base.report.poles.locations, abs=1e-10)
    assert result.report.zeros.locations == pytest.approx(base.report.zeros.locations, abs=1e-10)
    assert result.inverted == base.inverted
    finite = np.isfinite(base.U)
    scale = np.maximum(1.0, np.abs(base.U[finite]))
    assert np.max(np.abs(result.U[finite] - base.U[finite]) / scale) < 1e-9, instance.name
    assert np.allclose(result.psi1, base.psi1, atol=1e-9)


def test_schwarzian_is_mobius_invariant(rng):
    f = ParsedFunction.from_text("sinh(x)+x^3")
    image = apply_mobius(f, MobiusParams(c1=0.5, c2=2.0, d1=3.0, d2=-1.0))
    g = ParsedFunction(image, to_text(image))
    points = rng.uniform(-1.5, 1.5, 30)
    assert np.allclose(schwarzian(g, points), schwarzian(f, points), rtol=1e-9, atol=1e-9)


def test_chi_prime_undefined_at_critical_points():
    xi = ParsedFunction.from_text("x^2")
    assert math.isnan(chi_prime(xi, 1.0, 0.0))


def test_regularized_fills_removable_point():
    fn = lambda t: np.sin(t) / t  # noqa: E731
    values = regularized(fn, np.array([-0.5, 0.0, 0.5]), [0.0])
    assert values[1] == pytest.approx(1.0, abs=1e-10)
    assert values[0] == pytest.approx(math.sin(0.5) / 0.5, abs=1e-14)


def test_triplet_identities(rng):
    xi = ParsedFunction.from_text("x^4+2*x^2-1")
    dE = 4.0
    points = _away_from(rng.uniform(-2.0, 2.0, 30), [0.0, -0.6436, 0.6436])
    wplus, wminus, w = superpotential_triplet(xi, dE, points)
    assert np.allclose(w, chi_prime(xi, dE, points), rtol=1e-9, atol=1e-9)
    assert np.allclose(wplus - 2.0 * w, wminus, rtol=1e-9, atol=1e-9)


def test_wplus_pipeline_reproduces_xi_pipeline():
    wplus = ParsedFunction.from_text("2*x")
    zeros = check_wplus_zeros(wplus, 2.0, (-5.0, 5.0))
    assert np.allclose(zeros.locations, [0.0])
    x = np.linspace(-4.0, 4.0, 41)
    U = potential_from_wplus(wplus, 2.0, 1.0, x, zeros.locations)
    assert np.allclose(U, x ** 2, atol=1e-9)
    _, wminus, w = triplet_from_wplus(wplus, 2.0, np.array([1.0, 2.0]))
    assert np.allclose(wminus, 0.0)
    assert np.allclose(w, [1.0, 2.0])
    with pytest.raises(RegularityError):
        check_wplus_zeros(ParsedFunction.from_text("3*x"), 2.0, (-5.0, 5.0))


def test_harmonic_wave_functions(harmonic, harmonic_grid):
    xi, levels = harmonic
    result = build_construction(xi, levels, (-8.0, 8.0), 4001)
    x = harmonic_grid.points
    ground = np.exp(-x ** 2 / 2.0) / math.pi ** 0.25
    assert np.max(np.abs(result.psi1 - ground)) < 1e-6
    assert np.allclose(result.psi2 * result.psi2_scale, x * result.psi1, atol=1e-9)
    assert residual_check(result, 1) < 1e-4
    assert residual_check(result, 2) < 1e-4


def test_shared_node_construction():
    instance = instantiate_entry("harmonic13")
    result = build_construction(instance.xi, instance.levels, instance.domain, 4001)
    assert result.report.N1 == 1 and result.report.N2 == 3
    assert [f.source for f in result.analytic_node_factors] == ["critical"]
    x = result.grid.points
    assert np.allclose(result.U, x ** 2, atol=1e-8)
    assert np.allclose(sign_changes(x, result.psi1), [0.0], atol=1e-3)
    assert len(sign_changes(x, result.psi2)) == 3


def test_quartic_nodes_and_origin_value():
    instance = instantiate_entry("quartic")
    result = build_construction(instance.xi, instance.levels, instance.domain, 4001)
    assert float(potential(instance.xi, instance.levels, 0.0, special_points=[0.0])) == pytest.approx(-2.5, abs=1e-9)
    assert np.allclose(sign_changes(result.grid.points, result.psi2), [-0.6436, 0.6436], atol=1e-3)
    assert len(sign_changes(result.grid.points, result.psi1)) == 0


def test_reference_potentials(instance, rng):
    lo, hi = instance.domain
    points = _away_from(rng.uniform(0.5 * lo, 0.5 * hi, 40), _specials(instance.xi, (lo, hi)))
    U = np.asarray(potential(instance.xi, instance.levels, points))
    reference = reference_values(instance.name, instance.params, points)
    scale = np.maximum(1.0, np.abs(reference))
    error = np.max(np.abs(U - reference) / scale)
    assert error < 1e-6, f"{instance.name} differs from its closed form by {error:.3g}"


@pytest.mark.parametrize("name", ["harmonic", "harmonic13", "quartic", "sextic", "hyperbolic"])
def test_nodes_and_residuals(name):
    instance = instantiate_entry(name)
    report = analyze_singularities(instance.xi, instance.levels.deltaE, instance.domain)
    result = synthesize_wavefunctions(instance.xi, instance.levels, grid_with_step(instance.domain, 0.004), report)
    points = result.grid.points
    assert len(sign_changes(points, result.psi1)) == instance.expected[0]
    assert len(sign_changes(points, result.psi2)) == instance.expected[1]
    for which in (1, 2):
        residual = residual_check(result, which)
        assert residual < 1e-4, f"{name} psi{which} residual {residual:.3g}"


def test_inverted_orientation():
    xi = ParsedFunction.from_text("1/x")
    result = build_construction(xi, LevelPair(1.0, 3.0), (-8.0, 8.0), 2001)
    assert result.inverted
    assert result.advisory is not None
    assert np.allclose(result.U, result.grid.points ** 2, atol=1e-8)


def test_frame_round_trip(harmonic):
    xi, levels = harmonic
    result = build_construction(xi, levels, (-8.0, 8.0), 1001)
    frame = result.to_frame()
    assert list(frame.columns) == ["x", "U", "psi1", "psi2", "W", "chi_prime", "Wplus", "Wminus"]
    again = type(result).from_frame(frame, levels)
    assert np.array_equal(again.U, result.U)
    assert again.grid.n == 1001
