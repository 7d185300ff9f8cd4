from __future__ import annotations

import numpy as np
import pytest

from hyperlab.dynamics.algebra import (
    analyze_matrix,
    characteristic_polynomial,
    eigen_frame,
    integer_inverse,
    is_irreducible,
    nearest_lift,
    parse_matrix,
    periodic_points,
    reduce_mod1,
    torus_distance,
)
from hyperlab.dynamics.errors import (
    DimensionTooLarge,
    MatrixFormatError,
    NonRealSpectrum,
    NotHyperbolic,
    NotUnimodular,
    PreconditionError,
)

from conftest import CAT, CAT_EXPONENT, COMPANION


def test_cat_map_spectrum(cat):
    assert cat.dim == 2
    assert cat.stable_count == 1 and cat.unstable_count == 1
    assert cat.eigenvalues == pytest.approx([(3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2], abs=1e-12)
    assert cat.exponents == pytest.approx([-CAT_EXPONENT, CAT_EXPONENT], abs=1e-10)
    assert cat.simple_real_distinct
    assert cat.eigen_residual <= 1e-10


def test_eigenvectors_are_unit_and_invariant(cat):
    v = cat.eigenvectors
    assert np.allclose(np.linalg.norm(v, axis=0), 1.0)
    assert np.allclose(cat.matrix @ v, v * cat.eigenvalues[None, :], atol=1e-10)


def test_companion_matrix_has_three_real_distinct_eigenvalues(companion):
    assert companion.eigenvalues == pytest.approx([-0.5320888862, 0.6527036447, 2.8793852416], abs=1e-8)
    assert companion.stable_count == 2
    assert companion.simple_real_distinct
    assert companion.exponents.sum() == pytest.approx(0.0, abs=1e-10)


def test_identity_is_not_hyperbolic():
    with pytest.raises(NotHyperbolic):
        analyze_matrix([[1, 0], [0, 1]])


def test_non_unimodular_rejected():
    with pytest.raises(NotUnimodular):
        analyze_matrix([[2, 0], [0, 1]])


def test_rotation_spectrum_rejected():
    # x^2 - x + 1 has roots on the unit circle
    with pytest.raises((NotHyperbolic, NonRealSpectrum)):
        analyze_matrix([[0, -1], [1, 1]])


def test_dimension_cap():
    big = np.eye(7, dtype=int)
    with pytest.raises(DimensionTooLarge):
        analyze_matrix(big)


def test_repeated_spectrum_is_flagged():
    block = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]
    L = analyze_matrix(block)
    assert not L.simple_real_distinct
    with pytest.raises(PreconditionError):
        analyze_matrix(block, require_simple_real_distinct=True)
    assert not is_irreducible(block)


def test_characteristic_polynomial():
    assert characteristic_polynomial(np.array(CAT)) == [1, -3, 1]
    assert characteristic_polynomial(np.array(COMPANION)) == [1, -3, 0, 1]


def test_irreducible():
    assert is_irreducible(CAT)
    assert is_irreducible(COMPANION)


def test_integer_inverse(cat):
    inv = integer_inverse(cat.matrix)
    assert np.array_equal(inv @ cat.matrix, np.eye(2, dtype=np.int64))
    assert cat.inverse().exponents == pytest.approx([-CAT_EXPONENT, CAT_EXPONENT], abs=1e-10)


def test_parse_matrix():
    assert parse_matrix("2,1;1,1").tolist() == CAT
    with pytest.raises(MatrixFormatError):
        parse_matrix("2,1;1")
    with pytest.raises(MatrixFormatError):
        parse_matrix("a,b;c,d")


def test_eigen_frame_accepts_neutral_directions():
    values, vectors = eigen_frame(np.array([[2, 1, 0], [1, 1, 0], [0, 0, 1]]))
    assert values[1] == pytest.approx(1.0)
    assert np.allclose(np.abs(vectors[:, 1]), [0.0, 0.0, 1.0])


@pytest.mark.parametrize("period, count", [(1, 1), (2, 4), (3, 15), (4, 40)])
def test_periodic_point_counts(cat, period, count):
    points = periodic_points(cat.matrix, period)
    assert points.shape == (count, 2)
    image = points.copy()
    for _ in range(period):
        image = reduce_mod1(image @ cat.matrix.T.astype(float))
    assert torus_distance(image, points).max() <= 1e-12


def test_periodic_points_limit(cat):
    with pytest.raises(PreconditionError):
        periodic_points(cat.matrix, 8, max_points=100)


def test_torus_helpers():
    assert reduce_mod1([1.25, -0.25]) == pytest.approx([0.25, 0.75])
    assert nearest_lift([0.95, 0.1], [0.05, 0.9]) == pytest.approx([0.1, -0.2])
    assert float(torus_distance([0.95, 0.0], [0.05, 0.0])) == pytest.approx(0.1)


def test_reduced_points_lie_in_unit_cube():
    lifts = np.array([[3.5, -7.25], [-1e-18, 2.0], [0.999, -0.001]])
    points = reduce_mod1(lifts)
    assert isinstance(points, np.ndarray) and points.shape == lifts.shape
    assert np.all((points >= 0.0) & (points < 1.0))
