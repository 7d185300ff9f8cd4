from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from hyperlab.dynamics.algebra import analyze_matrix, torus_distance
from hyperlab.dynamics.cocycle import volume_average_exponents
from hyperlab.dynamics.conjugacy import (
    b3_ratio_series,
    leafwise_derivative_probe,
    periodic_data,
    probe_scales,
    rigidity_diagnostics,
    series_depth,
    solve_conjugacy,
)
from hyperlab.dynamics.errors import PreconditionError
from hyperlab.dynamics.maps import linear_map, make_conjugated_linear, make_shear_perturbation
from hyperlab.dynamics.parallel import uniform_points

from conftest import unit_shear

ANCHOR = np.array([0.31, 0.67])


@pytest.fixture(scope="module")
def h_conjugated(conjugated, cat):
    return solve_conjugacy(conjugated, cat, test_set_size=200)


@pytest.fixture(scope="module")
def h_perturbed(perturbed, cat):
    return solve_conjugacy(perturbed, cat, test_set_size=200)


def test_linear_map_has_identity_conjugacy(cat_map, cat):
    h = solve_conjugacy(cat_map, cat, test_set_size=50)
    assert h.depth == 0
    assert h.residual <= 1e-12
    pts = uniform_points(1, 20, 2)
    assert np.abs(h.displacement(pts)).max() <= 1e-14


def test_conjugacy_recovers_inverse_generator(conjugated, h_conjugated):
    pts = uniform_points(5, 100, 2)
    expected = conjugated.generator.inverse().evaluate(pts)
    assert torus_distance(h_conjugated.evaluate(pts), expected).max() <= 1e-6


def test_perturbed_residual_certified(h_perturbed):
    assert h_perturbed.residual <= 1e-8
    assert h_perturbed.depth > 0
    pts = uniform_points(9, 50, 2)
    assert np.abs(h_perturbed.displacement(pts)).max() > 1e-3
    assert h_perturbed.residual_on(pts).max() <= 1e-8


def test_depth_grows_with_tolerance(perturbed, cat):
    coarse, _ = series_depth(perturbed, cat, 1e-4, 10_000)
    fine, tail = series_depth(perturbed, cat, 1e-10, 10_000)
    assert fine > coarse
    assert tail <= 1e-10


def test_inverse_round_trip(h_perturbed):
    pts = uniform_points(2, 30, 2)
    back = h_perturbed.inverse_evaluate(h_perturbed.evaluate(pts))
    assert torus_distance(back, pts).max() <= 1e-8


@pytest.mark.parametrize("amplitude", [0.1, 0.28])
def test_inverse_for_large_perturbations(cat, amplitude):
    f = make_shear_perturbation(cat, [unit_shear(0, 1, amplitude), unit_shear(1, 0, amplitude)], threshold=10.0)
    assert f.c1_distance_bound >= 0.5
    h = solve_conjugacy(f, cat, test_set_size=50)
    y = uniform_points(13, 100, 2)
    x = h.inverse_evaluate(y)
    assert x.shape == y.shape
    assert torus_distance(h.evaluate(x), y).max() <= 1e-8
    # h^-1 carries L-orbits to f-orbits
    assert torus_distance(f.evaluate(x), h.inverse_evaluate((y @ cat.matrix.T) % 1.0)).max() <= 1e-9


def test_inverse_of_linear_map_is_identity(cat_map, cat):
    h = solve_conjugacy(cat_map, cat, test_set_size=10)
    pts = uniform_points(14, 20, 2)
    assert torus_distance(h.inverse_evaluate(pts), pts).max() <= 1e-14


def test_memo_stays_bounded(perturbed, cat):
    h = solve_conjugacy(perturbed, cat, test_set_size=10)
    h.memo_limit = 50
    pts = uniform_points(15, 40, 2)
    first = h.evaluate(pts)
    h.evaluate(uniform_points(16, 40, 2))
    assert h.memo_size == 50
    np.testing.assert_allclose(h.evaluate(pts), first, atol=1e-14)


def test_memoized_displacement_matches_direct(h_perturbed):
    pts = uniform_points(4, 10, 2)
    first = h_perturbed.displacement(pts)
    again = h_perturbed.displacement(pts)
    direct = h_perturbed.displacement(pts, memo=False)
    assert np.array_equal(first, again)
    np.testing.assert_allclose(first, direct, atol=1e-14)


def test_mismatched_matrix_rejected(cat_map):
    other = analyze_matrix([[3, 1], [2, 1]])
    with pytest.raises(PreconditionError):
        solve_conjugacy(cat_map, other, test_set_size=10)


def test_repeated_spectrum_rejected():
    block = analyze_matrix([[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]])
    with pytest.raises(PreconditionError):
        solve_conjugacy(linear_map(block), block, test_set_size=10)


def test_b3_vanishes_for_linear_map(cat_map, cat):
    series = b3_ratio_series(cat_map, cat, None, 1, ANCHOR, n_max=500)
    assert series.bound <= 1e-10
    assert abs(series.fit.slope) <= 1e-12


def test_b3_does_not_depend_on_conjugacy(perturbed, cat, h_perturbed):
    with_h = b3_ratio_series(perturbed, cat, h_perturbed, 1, ANCHOR, n_max=300)
    without = b3_ratio_series(perturbed, cat, None, 1, ANCHOR, n_max=300)
    np.testing.assert_array_equal(with_h.values, without.values)


def test_b3_bounded_for_smooth_conjugacy(conjugated, cat, h_conjugated):
    for index in (0, 1):
        series = b3_ratio_series(conjugated, cat, h_conjugated, index, ANCHOR, n_max=2000)
        assert series.bound < 1.0
        assert abs(series.fit.slope) < 1e-3


def test_b3_slope_tracks_exponent_gap(perturbed, cat, h_perturbed):
    est = volume_average_exponents(perturbed, samples=8, orbit_length=4000, seed=1)
    gap = est.exponents[1] - np.log(cat.eigenvalues[1])
    slopes, errors = [], []
    for x in uniform_points(11, 6, 2):
        series = b3_ratio_series(perturbed, cat, h_perturbed, 1, x, n_max=4000)
        slopes.append(series.fit.slope)
        errors.append(series.slope_stderr)
    combined = np.sqrt(np.mean(np.square(errors)) / len(errors) + est.stderr[1] ** 2)
    assert abs(np.mean(slopes) - gap) <= 3.0 * combined + 5e-3


def test_derivative_probe_linear(cat_map, cat):
    h = solve_conjugacy(cat_map, cat, test_set_size=10)
    probe = leafwise_derivative_probe(cat_map, cat, h, 1, ANCHOR, probe_scales(0.1, 8))
    np.testing.assert_allclose(probe.ratios, 1.0, atol=1e-9)
    assert probe.holder == pytest.approx(1.0, abs=1e-8)
    assert probe.stabilized


def test_derivative_probe_smooth_conjugacy(conjugated, cat, h_conjugated):
    probe = leafwise_derivative_probe(conjugated, cat, h_conjugated, 1, ANCHOR, probe_scales(0.1, 12))
    assert probe.stabilized
    assert 0.97 <= probe.holder <= 1.03
    assert np.all(probe.ratios > 0)


def test_periodic_data_linear(cat_map, cat):
    data = periodic_data(cat_map, cat, None, period_max=4)
    assert data.diverged == 0
    assert len(data.records) == 1 + 4 + 15 + 40
    assert data.max_gap <= 1e-10
    for record in data.records:
        np.testing.assert_allclose(record.leafwise_rates[1], np.log(cat.eigenvalues[1]), atol=1e-10)


def test_periodic_data_matches_for_conjugated_map(conjugated, cat, h_conjugated):
    data = periodic_data(conjugated, cat, h_conjugated, period_max=3)
    assert data.diverged == 0
    assert len(data.records) == 20
    assert data.max_gap <= 1e-8


def test_periodic_data_separates_perturbation(perturbed, cat, h_perturbed):
    data = periodic_data(perturbed, cat, h_perturbed, period_max=2)
    assert data.diverged == 0
    assert data.max_gap > 1e-3
    assert data.summary()["orbits"] == len(data.records)


def test_periodic_data_period_cap(cat_map, cat):
    with pytest.raises(PreconditionError):
        periodic_data(cat_map, cat, None, period_max=13)


@pytest.mark.parametrize("index", [0, 1])
def test_rigidity_diagnostics_smooth_conjugacy(conjugated, cat, h_conjugated, index):
    diag = rigidity_diagnostics(conjugated, cat, h_conjugated, index, points=4, b3_steps=2000, seed=2)
    assert diag.verdicts["b1"] == "IMPLIED"
    assert diag.verdicts["b2"] == "SMOOTH"
    assert diag.verdicts["b3"] == "SMOOTH"
    assert diag.verdicts["b4"] == "SMOOTH"
    assert diag.verdicts["b3_b4"] == "AGREE"
    assert diag.verdict == "SMOOTH-CONSISTENT"
    summary = diag.summary()
    assert summary["index"] == index
    assert set(summary["verdicts"]) == {"b1", "b2", "b3", "b4", "b5", "b3_b4"}
    assert summary["b2"]["oscillation_drift"] <= np.log1p(0.05)


def test_rigidity_diagnostics_linear_map(cat_map, cat):
    h = solve_conjugacy(cat_map, cat, test_set_size=10)
    diag = rigidity_diagnostics(cat_map, cat, h, 0, points=2, b3_steps=500, seed=1)
    assert diag.b4_gap == pytest.approx(0.0, abs=1e-12)
    assert diag.verdicts["b3_b4"] == "AGREE"
    assert diag.verdict == "SMOOTH-CONSISTENT"


@pytest.fixture(scope="module")
def singular_control(cat):
    f = make_shear_perturbation(cat, [unit_shear(0, 1, 0.25)])
    h = solve_conjugacy(f, cat, test_set_size=100)
    est = volume_average_exponents(f, samples=16, orbit_length=10_000, seed=5)
    return f, h, est


@pytest.mark.parametrize("index", [0, 1])
def test_singular_conjugacy_is_flagged(cat, singular_control, index):
    f, h, est = singular_control
    diag = rigidity_diagnostics(f, cat, h, index, points=16, b3_steps=2000, exponents=est, seed=4)
    # stable and unstable gaps share the expanding-view sign
    assert diag.b4_gap < 0
    assert diag.b3_slope < 0
    assert diag.verdicts["b3_b4"] == "AGREE"
    assert diag.verdicts["b4"] == "SINGULAR"
    assert diag.verdicts["b5"] == "SINGULAR"
    assert diag.b5_stabilized_fraction < 1.0
    assert np.isfinite(diag.b5_holder)
    assert diag.verdict != "SMOOTH-CONSISTENT"


def test_disagreeing_gap_estimates_are_inconclusive(conjugated, cat, h_conjugated):
    est = volume_average_exponents(conjugated, samples=4, orbit_length=2000, seed=3)
    shifted = replace(est, exponents=est.exponents + np.array([-0.05, 0.05]))
    diag = rigidity_diagnostics(conjugated, cat, h_conjugated, 1, points=4, b3_steps=2000, exponents=shifted, seed=2)
    assert diag.verdicts["b3_b4"] == "DISAGREE"
    assert diag.verdict == "INCONCLUSIVE"


def test_three_dimensional_conjugacy_recovers_generator(companion):
    f = make_conjugated_linear(companion, [unit_shear(0, 2, 0.03)])
    h = solve_conjugacy(f, companion, test_set_size=100)
    pts = uniform_points(12, 50, 3)
    expected = f.generator.inverse().evaluate(pts)
    assert torus_distance(h.evaluate(pts), expected).max() <= 1e-6
    data = periodic_data(f, companion, h, period_max=2)
    assert data.diverged == 0
    assert data.max_gap <= 1e-8


@pytest.fixture(scope="module")
def companion_conjugated(companion):
    f = make_conjugated_linear(companion, [unit_shear(0, 2, 0.03)])
    return f, solve_conjugacy(f, companion, test_set_size=100)


@pytest.mark.parametrize("index", [0, 1, 2])
def test_three_dimensional_diagnostics_are_smooth(companion, companion_conjugated, index):
    f, h = companion_conjugated
    diag = rigidity_diagnostics(f, companion, h, index, points=4, b3_steps=2000, seed=6)
    assert diag.verdicts["b3_b4"] == "AGREE"
    assert diag.verdict == "SMOOTH-CONSISTENT"


def test_three_dimensional_inverse(companion, companion_conjugated):
    f, h = companion_conjugated
    y = uniform_points(17, 50, 3)
    x = h.inverse_evaluate(y)
    assert torus_distance(h.evaluate(x), y).max() <= 1e-8
    assert torus_distance(x, f.generator.evaluate(y)).max() <= 1e-6
