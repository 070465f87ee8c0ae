import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from semsphere.errors import DimensionMismatch, ZeroVector
from semsphere.sphere import (
    BLOCK,
    Rotation,
    as_unit,
    basis,
    geodesic_distance,
    is_unit,
    normalize,
    random_rotation,
    sample_uniform_sphere,
)

vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=8).filter(
    lambda v: np.linalg.norm(v) > 1e-6
)


@given(vectors)
def test_normalize_gives_unit_norm(v):
    assert abs(np.linalg.norm(normalize(v)) - 1.0) < 1e-12


def test_normalize_rejects_zero():
    with pytest.raises(ZeroVector):
        normalize([0.0, 0.0, 1e-15])


def test_as_unit_checks_norm_and_shape():
    as_unit([0.6, 0.8])
    with pytest.raises(ValueError):
        as_unit([1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        as_unit([1.0])
    assert not is_unit([[1.0, 0.0]])


def test_geodesic_known_values():
    e1, e2 = basis(3, 0), basis(3, 1)
    assert geodesic_distance(e1, e1) == 0.0
    assert geodesic_distance(e1, e2) == pytest.approx(math.pi / 2, abs=1e-15)
    assert geodesic_distance(e1, -e1) == pytest.approx(math.pi, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        geodesic_distance(e1, basis(2, 0))


@given(vectors, vectors)
def test_geodesic_matches_arccos_and_is_symmetric(a, b):
    if len(a) != len(b):
        return
    u, v = normalize(a), normalize(b)
    d = geodesic_distance(u, v)
    assert d == pytest.approx(geodesic_distance(v, u), abs=1e-15)
    assert 0.0 <= d <= math.pi
    assert d == pytest.approx(math.acos(np.clip(u @ v, -1, 1)), abs=1e-7)


@settings(max_examples=50)
@given(st.integers(2, 9), st.integers(0, 2**32))
def test_rotations_are_special_orthogonal_and_isometric(d, seed):
    g = random_rotation(d, seed)
    assert np.allclose(g.matrix.T @ g.matrix, np.eye(d), atol=1e-12)
    assert np.linalg.det(g.matrix) == pytest.approx(1.0)
    P = sample_uniform_sphere(d, 2, seed)
    assert geodesic_distance(g.apply(P[0]), g.apply(P[1])) == pytest.approx(geodesic_distance(P[0], P[1]), abs=1e-12)
    assert np.allclose((g @ g.inverse()).matrix, np.eye(d), atol=1e-12)


def test_rotation_rejects_reflections():
    with pytest.raises(ValueError):
        Rotation(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        Rotation(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_so2_angles_are_uniform():
    # SO(2) Haar measure is uniform in the rotation angle; KS against U(-pi, pi)
    angles = [math.atan2(random_rotation(2, s).matrix[1, 0], random_rotation(2, s).matrix[0, 0]) for s in range(2000)]
    p = stats.kstest(angles, stats.uniform(loc=-math.pi, scale=2 * math.pi).cdf).pvalue
    assert p > 1e-3


def test_uniform_sphere_moments():
    X = sample_uniform_sphere(4, 200_000, seed=3)
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0)
    assert np.abs(X.mean(axis=0)).max() < 0.01
    assert np.allclose(X.T @ X / len(X), np.eye(4) / 4, atol=0.005)


def test_uniform_sphere_circle_angles_ks():
    X = sample_uniform_sphere(2, 20_000, seed=11)
    t = np.arctan2(X[:, 1], X[:, 0])
    assert stats.kstest(t, stats.uniform(loc=-math.pi, scale=2 * math.pi).cdf).pvalue > 1e-3


def test_sampling_is_chunk_independent():
    whole = sample_uniform_sphere(5, 3 * BLOCK + 17, seed=9)
    parts = np.vstack(
        [
            sample_uniform_sphere(5, 100, seed=9),
            sample_uniform_sphere(5, BLOCK, seed=9, offset=100),
            sample_uniform_sphere(5, 2 * BLOCK - 83, seed=9, offset=100 + BLOCK),
        ]
    )
    assert np.array_equal(whole, parts)
    assert not np.array_equal(whole[:10], sample_uniform_sphere(5, 10, seed=10))
