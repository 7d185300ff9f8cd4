from __future__ import annotations

import numpy as np
import pytest

from hyperlab.dynamics.algebra import analyze_matrix
from hyperlab.dynamics.cocycle import volume_average_exponents
from hyperlab.dynamics.entropy import (
    conditional_entropy,
    lowest_multiplier_orbit,
    partial_entropy_gap,
    pesin_report,
)
from hyperlab.dynamics.errors import FitUnstable
from hyperlab.dynamics.maps import linear_map, make_conjugated_linear, make_shear_perturbation, make_skew_product

from conftest import CAT, CAT_EXPONENT, unit_shear

N_VALUES = range(13)


@pytest.fixture(scope="module")
def strong(cat):
    """Perturbation large enough for periodic orbits to spread their multipliers."""
    return make_shear_perturbation(cat, [unit_shear(0, 1, 0.2)])


def test_linear_entropy_equals_exponent(cat_map):
    est = conditional_entropy(cat_map, 1, n_values=N_VALUES, samples=4, seed=1)
    assert est.entropy == pytest.approx(CAT_EXPONENT, rel=1e-4)
    assert est.stderr <= 1e-4
    assert est.lengths.shape == (4, len(N_VALUES))
    assert np.all(np.diff(est.lengths, axis=1) < 0)


def test_contracting_bundle_uses_inverse(cat_map):
    est = conditional_entropy(cat_map, 0, n_values=N_VALUES, samples=3, seed=2)
    assert est.entropy == pytest.approx(CAT_EXPONENT, rel=1e-4)


def test_pesin_equality_for_volume_sampling(perturbed):
    exponents = volume_average_exponents(perturbed, samples=8, orbit_length=4000, seed=4)
    est = conditional_entropy(perturbed, 1, n_values=N_VALUES, samples=8, seed=4, exponents=exponents)
    assert est.exponent == pytest.approx(exponents.exponents[1])
    report = pesin_report(perturbed, 1, est, exponents)
    assert report.verdict == "PESIN_EQUAL"
    assert report.deficit == pytest.approx(report.exponent - report.entropy)
    assert abs(report.deficit) <= report.tolerance
    assert report.tolerance >= 0.02 * report.exponent


def test_single_depth_cannot_be_fitted(cat_map):
    with pytest.raises(FitUnstable):
        conditional_entropy(cat_map, 1, n_values=[0], samples=2)


def test_lowest_multiplier_orbit_is_below_volume_rate(strong):
    orbit, rate = lowest_multiplier_orbit(strong, 1, period_max=4)
    assert orbit.ndim == 2 and orbit.shape[1] == 2
    assert 0.0 < rate < CAT_EXPONENT - 0.03


def test_periodic_control_shows_strict_inequality(strong):
    exponents = volume_average_exponents(strong, samples=8, orbit_length=4000, seed=6)
    est = conditional_entropy(strong, 1, n_values=N_VALUES, sampling="periodic", period_max=4)
    assert est.sampling == "periodic"
    report = pesin_report(strong, 1, est, exponents)
    assert report.deficit > 0
    assert report.verdict == "RUELLE_STRICT"


def test_partial_entropy_equal_for_rotation_skew(cat):
    skew = make_skew_product(cat, rotation=0.1)
    result = partial_entropy_gap(skew, n_values=N_VALUES, samples=3, seed=1)
    assert result.verdict == "EQUAL"
    assert result.above.entropy == pytest.approx(CAT_EXPONENT, rel=1e-4)
    assert abs(result.gap) <= result.tolerance
    assert result.summary()["verdict"] == "EQUAL"


def test_partial_entropy_drops_over_perturbed_base(cat):
    base = make_shear_perturbation(cat, [unit_shear(0, 1, 0.9)], threshold=10.0)
    skew = make_skew_product(base, rotation=0.1, threshold=10.0)
    result = partial_entropy_gap(skew, n_values=N_VALUES, samples=48, seed=3)
    assert result.below.entropy == pytest.approx(CAT_EXPONENT, rel=1e-4)
    assert result.above.entropy < result.below.entropy
    assert result.gap > 0
    assert result.verdict != "VIOLATED"


SWEEP_MATRICES = {"cat": CAT, "wide": [[3, 1], [2, 1]], "tall": [[2, 1], [3, 2]]}


def _sweep_map(matrix: str, variant: str):
    L = analyze_matrix(SWEEP_MATRICES[matrix])
    if variant == "linear":
        return linear_map(L)
    if variant == "one-shear":
        return make_shear_perturbation(L, [unit_shear(0, 1, 0.1)], threshold=10.0)
    if variant == "two-shears":
        return make_shear_perturbation(L, [unit_shear(0, 1, 0.05), unit_shear(1, 0, 0.05)], threshold=10.0)
    return make_conjugated_linear(L, [unit_shear(0, 1, 0.05), unit_shear(1, 0, 0.05)], threshold=10.0)


@pytest.mark.parametrize("variant", ["linear", "one-shear", "two-shears", "conjugated"])
@pytest.mark.parametrize("matrix", sorted(SWEEP_MATRICES))
def test_pesin_equality_across_maps(matrix, variant):
    f = _sweep_map(matrix, variant)
    exponents = volume_average_exponents(f, samples=8, orbit_length=4000, seed=7)
    est = conditional_entropy(f, 1, n_values=N_VALUES, samples=8, seed=7, exponents=exponents)
    report = pesin_report(f, 1, est, exponents)
    assert report.verdict != "RUELLE_VIOLATED"
    assert report.verdict == "PESIN_EQUAL"
