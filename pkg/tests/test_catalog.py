import math

import numpy as np
import pytest

from catalog import (ENTRIES, decatic_gap, decatic_internals, instantiate_entry, list_entries, quartic_gap,
                     reference_values, resolve_params)
from classify import analyze_singularities, predict_quantum_numbers
from conftest import sign_changes
from construct import build_construction, potential
from errors import NonNormalizable, ValidityError


def test_every_entry_is_listed_with_schema():
    listed = {entry["name"]: entry for entry in list_entries()}
    assert set(listed) == set(ENTRIES)
    assert set(listed["sextic"]["params"]) == {"a", "b", "beta", "e1"}
    assert listed["hyperbolic"]["params"]["x0"]["default"] == 0.5
    assert all(entry["description"] for entry in listed.values())


def test_instances_unpack():
    xi, levels, expected = instantiate_entry("harmonic")
    assert xi.describe() == "x"
    assert (levels.E1, levels.E2, expected) == (1.0, 3.0, (0, 1))
    assert instantiate_entry("harmonic").domain == (-8.0, 8.0)


def test_predicted_counts(instance):
    report = analyze_singularities(instance.xi, instance.levels.deltaE, instance.domain)
    numbers = predict_quantum_numbers(report)
    assert (numbers.N1, numbers.N2) == instance.expected, instance.name


@pytest.mark.parametrize("name, params, predicate", [
    ("sextic", {"beta": 1.0}, "beta^2 < a*b"),
    ("sextic", {"b": -1.0}, "b > 0"),
    ("hyperbolic", {"beta": 2.0}, "beta < delta*exp(x0)"),
    ("hyperbolic", {"beta": -0.7}, "-delta*exp(-x0) < beta"),
    ("quartic", {"x0": 0.0}, "x0 != 0"),
    ("decatic", {"omega": 0.5}, "omega in {1, -1}"),
    ("harmonic", {"e2": 0.5}, "e2 > e1"),
])
def test_invalid_parameters(name, params, predicate):
    with pytest.raises(ValidityError) as info:
        instantiate_entry(name, params)
    assert predicate in info.value.details()["predicate"]
    assert info.value.exit_code == 5


def test_unknown_names():
    with pytest.raises(ValidityError):
        instantiate_entry("octic")
    with pytest.raises(ValidityError):
        resolve_params("sextic", {"gamma": 1.0})


def test_gaps():
    assert quartic_gap(1.0, 1.0) == 4.0
    assert decatic_gap(1.0, 1.0) == pytest.approx(math.sqrt(272.0))
    assert decatic_gap(1.0, -1.0) == pytest.approx(12.0)
    internals = decatic_internals(1.0, 1.0)
    assert internals["gamma"] == pytest.approx(internals["deltaE"] ** 2 / (4.0 * internals["beta"]))
    levels = instantiate_entry("decatic", {"mean": 2.0}).levels
    assert levels.mean == pytest.approx(2.0)


def test_closed_form_values():
    assert reference_values("quartic", None, 0.0) == pytest.approx(-2.5)
    assert reference_values("decatic", None, 1.0) == pytest.approx(0.75)
    assert reference_values("harmonic13", None, 2.0) == pytest.approx(4.0)
    x = np.linspace(-3.0, 3.0, 7)
    assert np.allclose(reference_values("harmonic", None, x), x ** 2)


def test_hyperbolic_upper_state_vanishes_at_x0():
    instance = instantiate_entry("hyperbolic", {"x0": 0.3, "beta": -0.2})
    assert instance.xi(0.3) == pytest.approx(0.0, abs=1e-14)
    assert instance.expected == (0, 1)


def test_decatic_lower_branch_is_not_normalizable():
    instance = instantiate_entry("decatic", {"omega": -1.0})
    report = analyze_singularities(instance.xi, instance.levels.deltaE, instance.domain)
    assert (report.N1, report.N2) == (2, 4)
    assert instance.levels.deltaE == pytest.approx(12.0)
    with pytest.raises(NonNormalizable):
        build_construction(instance.xi, instance.levels, instance.domain, 2001)


OFF_DEFAULTS = [
    ("quartic", {"x0": 1.3, "x1": 0.8}),
    ("sextic", {"a": 2.0, "b": 0.5, "beta": 0.4}),
    ("hyperbolic", {"delta": 1.5, "x0": -0.4, "beta": 0.2}),
    ("decatic", {"mu": 1.7}),
]


@pytest.mark.parametrize("name, params", OFF_DEFAULTS)
def test_entries_away_from_defaults(name, params, rng):
    instance = instantiate_entry(name, params)
    report = analyze_singularities(instance.xi, instance.levels.deltaE, instance.domain)
    numbers = predict_quantum_numbers(report)
    assert (numbers.N1, numbers.N2) == instance.expected

    lo, hi = instance.domain
    specials = np.asarray(report.poles.locations + [c.location for c in report.criticals])
    x = rng.uniform(0.5 * lo, 0.5 * hi, 60)
    if specials.size:
        x = x[np.min(np.abs(x[:, None] - specials[None, :]), axis=1) > 0.05]
    U = np.asarray(potential(instance.xi, instance.levels, x))
    reference = reference_values(name, instance.params, x)
    error = np.max(np.abs(U - reference) / np.maximum(1.0, np.abs(reference)))
    assert error < 1e-6, f"{name} {params} differs from its closed form by {error:.3g}"

    result = build_construction(instance.xi, instance.levels, instance.domain, 4001)
    points = result.grid.points
    assert len(sign_changes(points, result.psi1)) == instance.expected[0]
    assert len(sign_changes(points, result.psi2)) == instance.expected[1]
