from __future__ import annotations

import numpy as np
import pytest

from hyperlab.dynamics.errors import PreconditionError, TraceTooShort
from hyperlab.dynamics.foliation import (
    ball_profile,
    delta_n,
    density_equivariance_defect,
    expanding_view,
    gibbs_density,
    leaf_dynamical_ball,
    leaf_invariance_defect,
    trace_leaf,
)
from hyperlab.dynamics.maps import make_skew_product
from hyperlab.dynamics.parallel import uniform_points
from hyperlab.dynamics.stats import affine_fit

from conftest import CAT_EXPONENT

ANCHOR = np.array([0.31, 0.62])


def test_linear_leaf_is_straight(cat, cat_map):
    segment = trace_leaf(cat_map, 1, ANCHOR, step=5e-3, half_length=0.1)
    e_u = cat.eigenvectors[:, 1]
    offsets = segment.lifts - ANCHOR
    transverse = offsets - np.outer(offsets @ e_u, e_u)
    assert np.abs(transverse).max() <= 1e-10
    assert segment.arclength[segment.anchor_position] == 0.0
    assert segment.length == pytest.approx(0.2)


def test_long_leaf_wraps(cat_map):
    segment = trace_leaf(cat_map, 1, ANCHOR, step=0.02, half_length=1.5)
    assert np.all(np.diff(segment.arclength) > 0)
    assert segment.lifts.max() > 1.0 or segment.lifts.min() < 0.0
    assert np.all((segment.nodes >= 0.0) & (segment.nodes < 1.0))


def test_node_spacing(perturbed):
    segment = trace_leaf(perturbed, 1, ANCHOR, step=5e-3, half_length=0.1)
    spacing = np.linalg.norm(np.diff(segment.lifts, axis=0), axis=-1)
    assert np.all(spacing >= 0.5 * segment.step)
    assert np.all(spacing <= 1.5 * segment.step)


def test_half_length_cap(cat_map):
    with pytest.raises(PreconditionError):
        trace_leaf(cat_map, 1, ANCHOR, half_length=5.0)


def test_perturbed_leaf_is_invariant(perturbed):
    segment = trace_leaf(perturbed, 1, ANCHOR, step=2.5e-3, half_length=0.1)
    assert leaf_invariance_defect(perturbed, segment) <= 1e-5


def test_expanding_view(cat_map):
    g, index = expanding_view(cat_map, 0)
    assert g is cat_map.inverse() and index == 1
    assert expanding_view(cat_map, 1) == (cat_map, 1)


def test_neutral_bundle_has_no_expanding_view(cat):
    skew = make_skew_product(cat, rotation=0.1)
    with pytest.raises(PreconditionError):
        expanding_view(skew.map, skew.center_index)


def test_delta_of_linear_map_is_one(cat_map):
    segment = trace_leaf(cat_map, 1, ANCHOR, step=0.01, half_length=0.1)
    z = segment.nodes[-1]
    assert delta_n(cat_map, 1, ANCHOR, z, 12).value == pytest.approx(1.0, abs=1e-12)
    assert delta_n(cat_map, 1, ANCHOR, ANCHOR, 12).value == 1.0


def test_delta_needs_expanding_bundle(cat_map):
    with pytest.raises(PreconditionError):
        delta_n(cat_map, 0, ANCHOR, ANCHOR, 3)


def test_delta_products_converge(perturbed):
    segment = trace_leaf(perturbed, 1, ANCHOR, step=0.01, half_length=0.1)
    z = segment.nodes[0]
    values = [delta_n(perturbed, 1, ANCHOR, z, n).log_value for n in (5, 10, 20, 30)]
    assert abs(values[3] - values[2]) < abs(values[1] - values[0])
    assert abs(values[3] - values[2]) <= 1e-6
    assert delta_n(perturbed, 1, ANCHOR, z, 20).theta < 1.0


def test_linear_density_is_uniform(cat_map):
    segment = trace_leaf(cat_map, 1, ANCHOR, step=0.01, half_length=0.1)
    profile = gibbs_density(cat_map, 1, segment)
    assert profile.values == pytest.approx(np.full(len(profile.values), 1.0 / segment.length), rel=1e-12)
    assert profile.integral() == pytest.approx(1.0, abs=1e-12)


def test_perturbed_density(perturbed):
    segment = trace_leaf(perturbed, 1, ANCHOR, step=2.5e-3, half_length=0.1)
    profile = gibbs_density(perturbed, 1, segment)
    assert np.all(profile.values > 0)
    assert profile.integral() == pytest.approx(1.0, abs=1e-8)
    assert profile.tail_bound <= 1e-6
    assert profile.values.max() / profile.values.min() > 1.0 + 1e-4
    gaps = profile.cauchy_gaps[1:]
    fit = affine_fit(np.arange(len(gaps)), np.log(gaps))
    assert np.exp(fit.slope) < 0.6
    assert fit.r_squared >= 0.95


def test_density_mesh_refinement(perturbed):
    coarse = trace_leaf(perturbed, 1, ANCHOR, step=5e-3, half_length=0.1)
    fine = trace_leaf(perturbed, 1, ANCHOR, step=2.5e-3, half_length=0.1)
    rho_coarse = gibbs_density(perturbed, 1, coarse).values
    rho_fine = gibbs_density(perturbed, 1, fine).values[::2]
    assert np.abs(rho_fine / rho_coarse - 1.0).max() <= 1e-5


def test_density_equivariance(perturbed):
    segment = trace_leaf(perturbed, 1, ANCHOR, step=5e-3, half_length=0.1)
    assert density_equivariance_defect(perturbed, 1, segment, 15) <= 1e-5


def test_linear_ball_lengths(cat, cat_map):
    delta = 0.05
    lengths = ball_profile(cat_map, 1, ANCHOR, delta, [0, 1, 3, 5])
    expected = 2 * delta * cat.eigenvalues[1] ** -np.array([0, 1, 3, 5], dtype=float)
    assert lengths == pytest.approx(expected, rel=1e-6)
    assert leaf_dynamical_ball(cat_map, 1, ANCHOR, delta, 0) == pytest.approx(2 * delta, rel=1e-8)


def test_ball_monotone(perturbed):
    lengths = ball_profile(perturbed, 1, ANCHOR, 0.05, list(range(8)))
    assert np.all(np.diff(lengths) <= 0)
    smaller = ball_profile(perturbed, 1, ANCHOR, 0.025, [4])
    assert smaller[0] <= lengths[4]


def test_ball_growth_rate_matches_exponent(perturbed):
    rates = []
    for x in uniform_points(3, 6, 2):
        lengths = ball_profile(perturbed, 1, x, 0.05, [0, 12])
        rates.append(np.log(lengths[0] / lengths[1]) / 12)
    assert np.mean(rates) == pytest.approx(CAT_EXPONENT, rel=0.1)


def test_ball_outside_trace(cat_map):
    short = trace_leaf(cat_map, 1, ANCHOR, step=5e-3, half_length=0.02)
    with pytest.raises(TraceTooShort):
        leaf_dynamical_ball(cat_map, 1, ANCHOR, 0.05, 0, short)
