import math

import numpy as np
from hypothesis import given, settings, strategies as st

from caresim import geom
from caresim.geom import Capsule
from caresim.rng import SeededRng


def random_quat(rng):
    q = (rng.normal(), rng.normal(), rng.normal(), rng.normal())
    return geom.quat_normalize(q)


def random_transform(rng):
    return (random_quat(rng), (rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)))


def test_identity_transform_point():
    assert geom.transform_point(geom.IDENTITY, (1.0, 2.0, 3.0)) == (1.0, 2.0, 3.0)


def test_translation_moves_origin():
    t = (geom.QUAT_IDENTITY, (0.0, 0.0, 1.0))
    assert geom.transform_point(t, (0.0, 0.0, 0.0)) == (0.0, 0.0, 1.0)


def test_rigid_transform_preserves_distance():
    rng = SeededRng(2024)
    for _ in range(1000):
        t = random_transform(rng)
        p = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5))
        q = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5))
        d0 = geom.vdist(p, q)
        d1 = geom.vdist(geom.t_point(t, p), geom.t_point(t, q))
        assert abs(d0 - d1) < 1e-9


def test_compose_inverse_is_identity():
    rng = SeededRng(7)
    for _ in range(200):
        t = random_transform(rng)
        ident = geom.t_compose(t, geom.t_inverse(t))
        assert geom.vnorm(ident[1]) < 1e-9
        err = math.sqrt(sum((a - b) ** 2 for a, b in zip(ident[0], geom.QUAT_IDENTITY)))
        assert err < 1e-9


def test_compose_associative():
    rng = SeededRng(8)
    for _ in range(100):
        a, b, c = (random_transform(rng) for _ in range(3))
        p = (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
        left = geom.t_point(geom.t_compose(geom.t_compose(a, b), c), p)
        right = geom.t_point(geom.t_compose(a, geom.t_compose(b, c)), p)
        assert geom.vdist(left, right) < 1e-9


def test_quat_matrix_roundtrip():
    rng = SeededRng(31)
    for _ in range(500):
        q = random_quat(rng)
        q2 = geom.quat_from_matrix(geom.quat_to_matrix(q))
        # same rotation up to sign
        err_pos = math.sqrt(sum((a - b) ** 2 for a, b in zip(q, q2)))
        err_neg = math.sqrt(sum((a + b) ** 2 for a, b in zip(q, q2)))
        assert min(err_pos, err_neg) < 1e-9


def test_quat_normalize_unit_norm():
    q = geom.quat_normalize((3.0, 4.0, 0.0, 0.0))
    n = math.sqrt(sum(c * c for c in q))
    assert abs(n - 1.0) < 1e-9


def test_quat_rotate_matches_matrix():
    rng = SeededRng(17)
    for _ in range(200):
        q = random_quat(rng)
        v = (rng.normal(), rng.normal(), rng.normal())
        m = np.array(geom.quat_to_matrix(q))
        expected = m @ np.array(v)
        got = geom.quat_rotate(q, v)
        assert np.allclose(got, expected, atol=1e-12)


# -- capsules ---------------------------------------------------------------

def test_parallel_capsules_distance():
    a = Capsule((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.1)
    b = Capsule((0.0, 1.0, 0.0), (1.0, 1.0, 0.0), 0.1)
    d, _, _, _ = geom.capsule_distance(a, b)
    assert abs(d - 0.8) < 1e-12


def test_identical_capsules_full_penetration():
    a = Capsule((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), 0.25)
    d, _, _, _ = geom.capsule_distance(a, a)
    assert abs(d - (-0.5)) < 1e-12


def _brute_force_capsule_distance(a: Capsule, b: Capsule, n=400):
    """Dense sampling oracle: min pairwise distance between swept segments."""
    ts = np.linspace(0.0, 1.0, n)
    pa = np.array(a.a) + np.outer(ts, np.subtract(a.b, a.a))
    pb = np.array(b.a) + np.outer(ts, np.subtract(b.b, b.a))
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1)
    return math.sqrt(d2.min()) - a.r - b.r


def test_capsule_distance_matches_sampling_oracle():
    rng = SeededRng(404)
    for _ in range(1000):
        a = Capsule((rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    rng.uniform(0.01, 0.3))
        b = Capsule((rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    rng.uniform(0.01, 0.3))
        exact, _, _, _ = geom.capsule_distance(a, b)
        approx = _brute_force_capsule_distance(a, b)
        # sampling grid resolution bounds the oracle error
        assert exact <= approx + 1e-9
        assert abs(exact - approx) < 1e-4 + 2.0 * (2.0 * math.sqrt(3) / 400)


@settings(max_examples=200)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_segment_closest_symmetry(ax, ay, az, bx, by, bz):
    p0 = (ax, ay, az)
    p1 = (bx, by, bz)
    q0 = (1.0, 0.5, -0.25)
    q1 = (-0.5, 1.0, 0.75)
    _, _, _, _, d1 = geom.segment_segment_closest(p0, p1, q0, q1)
    _, _, _, _, d2 = geom.segment_segment_closest(q0, q1, p0, p1)
    assert abs(d1 - d2) < 1e-9
