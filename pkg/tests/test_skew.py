from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import yaml

from hyperlab.dynamics.algebra import torus_distance
from hyperlab.dynamics.errors import PreconditionError
from hyperlab.dynamics.maps import KatokFamily, ShearFactor, build_map, make_katok_family, make_skew_product
from hyperlab.dynamics.parallel import uniform_points
from hyperlab.dynamics.profiles import TrigProfile
from hyperlab.models.documents import MapDocument
from hyperlab.dynamics.skew import (
    HolonomyMap,
    absolute_continuity_probe,
    center_holonomy,
    center_leaf_invariance,
    holonomy_cocycle_defect,
    katok_center_leaf,
    skew_center_holonomy,
    solve_family,
    trace_center_leaf,
    unique_intersection_indicator,
)

from conftest import unit_shear


@pytest.fixture(scope="module")
def family(cat):
    return make_katok_family(cat, [unit_shear(0, 1, 0.1)], "constant", members=2)


@pytest.fixture(scope="module")
def solutions(family):
    return solve_family(family, test_set_size=100)


def test_family_grid_and_members(family):
    np.testing.assert_allclose(family.t_grid, [0.0, 0.5, 1.0])
    assert family.size == 3
    x = np.array([0.2, 0.7])
    image, t = family.suspension(x, 1)
    assert t == 0.5
    np.testing.assert_allclose(image, family.members[1].evaluate(x))


def test_holonomy_to_same_fiber_is_identity(family, solutions):
    H = center_holonomy(family, 1, 1, solutions)
    pts = uniform_points(3, 40, 2)
    assert torus_distance(H.evaluate(pts), pts).max() <= 1e-8


def test_holonomy_matches_generators(family, solutions):
    H = center_holonomy(family, 0, 2, solutions)
    pts = uniform_points(4, 40, 2)
    oracle = family.generator(2).evaluate(family.generator(0).inverse().evaluate(pts))
    assert torus_distance(H.evaluate(pts), oracle).max() <= 1e-6
    assert torus_distance(H.evaluate(pts), pts).max() > 1e-3
    assert H.source == 0.0 and H.target == 1.0


def test_holonomy_cocycle(family, solutions):
    pts = uniform_points(5, 30, 2)
    first = center_holonomy(family, 0, 1, solutions)
    second = center_holonomy(family, 1, 2, solutions)
    direct = center_holonomy(family, 0, 2, solutions)
    assert holonomy_cocycle_defect(first, second, direct, pts) <= 1e-8


def test_center_leaves_are_invariant(family, solutions):
    z = uniform_points(6, 10, 2)
    leaf = katok_center_leaf(family, solutions, z)
    assert leaf.points.shape == (3, 10, 2)
    assert len(leaf.rows()) == 30
    assert center_leaf_invariance(family, solutions, z) <= 1e-7


def test_identity_holonomy_is_absolutely_continuous():
    identity = HolonomyMap(0.0, 0.0, lambda x: x)
    probe = absolute_continuity_probe(identity, grid=64, refinements=2)
    assert probe.grids == [64, 128, 256]
    assert probe.concentration[0] == pytest.approx(0.90015, abs=1e-4)
    np.testing.assert_allclose(probe.spreads, 1.0, atol=1e-9)
    assert probe.verdict == "AC-LIKE"
    assert probe.counts.sum() == 64 * 64


def test_smooth_holonomy_is_absolutely_continuous(family, solutions):
    probe = absolute_continuity_probe(center_holonomy(family, 0, 2, solutions), grid=32, refinements=2)
    assert probe.verdict == "AC-LIKE"
    assert max(probe.spreads) < 1.5


def test_rotation_skew_center_holonomy_is_identity(cat):
    skew = make_skew_product(cat, rotation=0.1)
    H = skew_center_holonomy(skew, 0.2, 0.6, steps=4)
    pts = uniform_points(7, 10, 2)
    assert torus_distance(H.evaluate(pts), pts).max() <= 1e-9
    assert H.residual <= 1e-9


def test_fiber_shift_keeps_center_vertical(cat):
    shift = ShearFactor(2, 0, TrigProfile.unit_sine(), 0.05)
    skew = make_skew_product(cat, rotation=0.1, fiber_shift=[shift])
    leaf = trace_center_leaf(skew, np.array([[0.3, 0.4, 0.1]]), 0.5, steps=4)
    assert leaf.points.shape == (5, 1, 3)
    np.testing.assert_allclose(leaf.points[:, 0, :2], [[0.3, 0.4]] * 5, atol=1e-8)
    np.testing.assert_allclose(leaf.points[-1, 0, 2], 0.6)


def test_fiber_perturbation_tilts_center_leaves(cat):
    skew = make_skew_product(cat, rotation=0.1, fiber_perturbation=[unit_shear(0, 2, 1.0)], epsilon_c=0.02)
    H = skew_center_holonomy(skew, 0.0, 0.3, steps=8)
    pts = uniform_points(8, 10, 2)
    moved = torus_distance(H.evaluate(pts), pts).max()
    assert 1e-5 < moved < 0.1
    assert H.residual < 1e-3


def test_single_member_has_no_intersection_signal(cat):
    lone = make_katok_family(cat, [unit_shear(0, 1, 0.1)], "constant", members=0)
    indicator = unique_intersection_indicator(lone, solve_family(lone, test_set_size=50), leaves=4, length=200)
    assert indicator.fraction == 0.0
    assert indicator.averages.shape == (4, 1)


def test_constant_family_birkhoff_averages_agree(family, solutions):
    indicator = unique_intersection_indicator(family, solutions, leaves=6, length=1000, seed=2)
    assert indicator.fraction <= 0.5
    assert indicator.summary()["members"] == 3


def test_birkhoff_length_floor(family, solutions):
    with pytest.raises(PreconditionError):
        unique_intersection_indicator(family, solutions, leaves=2, length=1)


VARYING_DOCUMENT = Path(__file__).resolve().parents[1] / "experiments" / "katok_varying.yaml"


@pytest.fixture(scope="module")
def varying():
    raw = yaml.safe_load(VARYING_DOCUMENT.read_text(encoding="utf-8"))
    family = build_map(MapDocument.model_validate(raw["map"]))
    assert isinstance(family, KatokFamily)
    return family, raw["params"]


def test_varying_family_reaches_exponent_spread(varying):
    family, _ = varying
    sums = family.unstable_sums
    assert family.profile == "varying" and family.size == 3
    assert sums.max() - sums.min() >= 0.01
    assert sums[-1] < sums[0]


def test_varying_family_separates_center_leaves(varying):
    family, params = varying
    solutions = solve_family(family, test_set_size=50)
    indicator = unique_intersection_indicator(family, solutions, params["leaves"], length=params["birkhoff_length"], seed=5)
    assert indicator.fraction >= 0.95
    H = center_holonomy(family, 0, family.size - 1, solutions)
    report = absolute_continuity_probe(H, params["grid"], params["refinements"], seed=5)
    assert report.verdict in ("AC-LIKE", "SINGULAR-LIKE", "INCONCLUSIVE")
    assert report.spreads[-1] > 1.0


def test_inverse_orbit_follows_the_map(varying):
    family, _ = varying
    sol = solve_family(family, test_set_size=50)[-1]
    y = uniform_points(8, 3, 2)
    orbit = sol.inverse_orbit(y, 40)
    assert orbit.shape == (3, 40, 2)
    assert torus_distance(orbit[:, 0], sol.inverse_evaluate(y)).max() <= 1e-8
    assert torus_distance(sol.f.evaluate(orbit[:, :-1]), orbit[:, 1:]).max() <= 1e-9
