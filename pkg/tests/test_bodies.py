import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from convex_sampler import A1Violation, Ball, Box, CapabilityError, Ellipsoid, Polytope, validate_geometry
from convex_sampler.bodies import body_from_dict, load_body, save_body

TRI = Polytope([[1, 1], [-1, 0], [0, -1]], [1.5, 1.5, 1.5], circumradius=10.0)

coords = st.floats(-6, 6, allow_nan=False, allow_infinity=False)


def point(d):
    return arrays(np.float64, d, elements=coords)


PROJ_BODIES = {
    "ball": Ball(3, 2.0),
    "box": Box([[-1, 2], [-1.5, 1], [-1, 1]]),
    "ellipsoid": Ellipsoid([1.0, 2.0, 3.0]),
}
SEP_BODIES = dict(PROJ_BODIES, polytope=Polytope(np.vstack([np.eye(3), -np.eye(3), [[1, 1, 1]]]), [2] * 6 + [2.5], 4.0))


def test_contains_examples():
    assert Ball(2, 2.0).contains([1, 0])
    assert not Box.cube(2).contains([1.5, 0])
    assert not TRI.contains([2, 0])
    assert TRI.contains([0.5, 0.5])


def test_contains_batch_and_dimension_check():
    b = Box.cube(2)
    out = b.contains(np.array([[0, 0], [2, 0], [1, 1]]))
    assert out.tolist() == [True, False, True]
    with pytest.raises(ValueError):
        b.contains([0, 0, 0])


def test_project_examples():
    np.testing.assert_allclose(Ball(2, 1.0).project([2, 0]), [1, 0])
    np.testing.assert_allclose(Box.cube(2).project([2, -3]), [1, -1])
    y = np.array([0.3, -0.2])
    for body in (Ball(2, 1.0), Box.cube(2), Ellipsoid([1, 2])):
        np.testing.assert_array_equal(body.project(y), y)


def test_ellipsoid_projection_against_kkt():
    e = Ellipsoid([1.0, 3.0])
    y = np.array([2.0, 4.0])
    p = e.project(y)
    # on the boundary, and y - p parallel to the outward normal p / a^2
    assert math.isclose(float(np.sum(p**2 / e.semi_axes**2)), 1.0, rel_tol=1e-12)
    n = p / e.semi_axes**2
    r = y - p
    assert abs(r[0] * n[1] - r[1] * n[0]) < 1e-10
    assert r @ n > 0


def test_polytope_has_no_projection():
    with pytest.raises(CapabilityError):
        TRI.project([3, 3])
    with pytest.raises(CapabilityError):
        TRI.exact_uniform(np.random.default_rng(0))


def test_separate_examples():
    np.testing.assert_allclose(Ball(2, 2.0).separate([3, 0]), [1, 0])
    np.testing.assert_allclose(TRI.separate([2, 0]), np.array([1, 1]) / math.sqrt(2))
    assert Box.cube(2).separate([0, 0]) is None


def test_polytope_separation_valid_over_sampled_body():
    rng = np.random.default_rng(1)
    g = TRI.separate(np.array([2.0, 0.0]))
    z = rng.uniform(-1.5, 3.0, size=(20000, 2))
    z = z[TRI.contains(z)][:1000]
    assert z.shape[0] == 1000
    assert np.all((np.array([2.0, 0.0]) - z) @ g >= -1e-9)


def test_polytope_ties_use_lowest_row():
    P = Polytope([[1, 0], [1, 0], [0, 1]], [1, 1, 1], 2.0)
    np.testing.assert_array_equal(P.separate([3.0, 0.0]), [1.0, 0.0])


def test_validate_geometry_examples():
    g = validate_geometry(Ball(5, 2.0))
    assert (g.inradius, g.circumradius, g.diameter_bound, g.lsi_heuristic, g.minwidth, g.gamma) == (2, 2, 4, 16, 4, 0.5)
    g = validate_geometry(Box.cube(3))
    assert g.inradius == 1 and g.minwidth == 2
    assert math.isclose(g.circumradius, math.sqrt(3))
    assert math.isclose(g.gamma, math.sqrt(3) / 2)
    assert math.isclose(g.pi_heuristic, 12 * math.log(3))
    with pytest.raises(A1Violation):
        validate_geometry(Ball(3, 0.5))


def test_polytope_geometry_has_no_width():
    P = SEP_BODIES["polytope"]
    g = validate_geometry(P)
    assert g.minwidth is None and g.gamma is None
    assert math.isclose(P.inradius, min(2.0, 2.5 / math.sqrt(3)))


def test_box_off_centre_inradius():
    b = Box([[-1, 3], [-2, 1.5]])
    assert b.inradius == 1.0
    assert math.isclose(b.circumradius, math.hypot(3, 2))
    with pytest.raises(A1Violation):
        validate_geometry(Box([[0.5, 2], [-1, 1]]))


@pytest.mark.parametrize(
    "body, mean, m2",
    [(Ball(3, 1.0), 0.0, 0.6), (Box.cube(3), 0.0, 1.0), (Ball(2, 1.0), 0.0, 0.5)],
)
def test_exact_uniform_moments(body, mean, m2):
    X = body.exact_uniform(np.random.default_rng(2), size=100_000)
    assert np.all(body.contains(X))
    np.testing.assert_allclose(X.mean(axis=0), mean, atol=0.01)
    assert abs(np.mean(np.sum(X**2, axis=1)) - m2) < 0.01


def test_exact_uniform_single_draw_shape():
    assert Ball(4).exact_uniform(np.random.default_rng(0)).shape == (4,)


def test_json_round_trip(tmp_path):
    for body in list(SEP_BODIES.values()) + [Box.cube(2)]:
        path = tmp_path / f"{body.kind}.json"
        save_body(body, path)
        again = load_body(path)
        assert again.to_dict() == body.to_dict()
        assert json.loads(path.read_text())["type"] == body.kind


def test_body_from_dict_errors():
    with pytest.raises(ValueError):
        body_from_dict({"type": "simplex", "d": 2})
    with pytest.raises(ValueError):
        body_from_dict({"type": "ball", "d": 0, "radius": 1})
    with pytest.raises(ValueError):
        body_from_dict({"type": "box", "d": 3, "bounds": [[-1, 1], [-1, 1]]})
    with pytest.raises(ValueError):
        body_from_dict({"type": "polytope", "d": 1, "A": [[1]], "b": [1]})


# properties


@pytest.mark.parametrize("name", sorted(PROJ_BODIES))
@settings(max_examples=200, deadline=None)
@given(y=point(3))
def test_projection_idempotent(name, y):
    body = PROJ_BODIES[name]
    p = body.project(y)
    assert body.contains(p)
    np.testing.assert_allclose(body.project(p), p, atol=1e-10 * body.circumradius)


@pytest.mark.parametrize("name", sorted(PROJ_BODIES))
@settings(max_examples=200, deadline=None)
@given(a=point(3), b=point(3))
def test_projection_non_expansive(name, a, b):
    body = PROJ_BODIES[name]
    assert np.linalg.norm(body.project(a) - body.project(b)) <= np.linalg.norm(a - b) + 1e-9


@pytest.mark.parametrize("name", ["ball", "box"])
@settings(max_examples=100, deadline=None)
@given(y=point(3), seed=st.integers(0, 2**32 - 1))
def test_obtuse_angle(name, y, seed):
    body = PROJ_BODIES[name]
    X = body.exact_uniform(np.random.default_rng(seed), size=200)
    p = body.project(y)
    assert np.all((X - p) @ (p - y) >= -1e-9)


@pytest.mark.parametrize("name", sorted(SEP_BODIES))
@settings(max_examples=100, deadline=None)
@given(x=point(3), seed=st.integers(0, 2**32 - 1))
def test_separation_validity_and_consistency(name, x, seed):
    body = SEP_BODIES[name]
    g = body.separate(x)
    assert (g is None) == body.contains(x)
    if g is None:
        return
    assert math.isclose(float(np.linalg.norm(g)), 1.0, rel_tol=1e-12)
    rng = np.random.default_rng(seed)
    R = body.circumradius
    z = rng.uniform(-R, R, size=(4000, 3))
    z = z[body.contains(z)][:1000]
    assert np.all((x - z) @ g >= -1e-9)
