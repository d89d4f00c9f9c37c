import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lopa.errors import CharacteristicBoundary, DimensionMismatch, SchemaError
from lopa.sampling import hemisphere_grid, sphere_points
from lopa.system import (BoundarySymbol, FirstOrderSystem, Frequency, TangentialDirection,
                         check_hyperbolicity, make_symbol, parse_system, semisimple_defect,
                         serialize_system, validate_system)

WAVE = [[0.0, 1.0], [1.0, 0.0]]


def test_validate_wave():
    rep = validate_system(FirstOrderSystem((WAVE,)))
    assert rep.passed
    assert rep.sigma_min_normal == pytest.approx(1.0)


def test_validate_characteristic():
    with pytest.raises(CharacteristicBoundary) as info:
        validate_system(FirstOrderSystem(([[1.0, 0.0], [0.0, 0.0]],)))
    assert info.value.sigma_min == 0.0


def test_validate_two_dimensional():
    assert validate_system(FirstOrderSystem((np.diag([1.0, -1.0]), WAVE))).passed


def test_shapes_are_checked():
    with pytest.raises(DimensionMismatch):
        FirstOrderSystem((np.eye(2), np.eye(3)))


def test_hyperbolicity_examples():
    assert check_hyperbolicity(FirstOrderSystem((WAVE,))).passed
    rep = check_hyperbolicity(FirstOrderSystem(([[0.0, 1.0], [0.0, 0.0]],)))
    assert not rep.passed and rep.non_semisimple
    assert check_hyperbolicity(FirstOrderSystem((np.diag([2.0, -1.0]),
                                                 [[0.0, 3.0], [3.0, 0.0]]))).passed


def test_hyperbolicity_detects_complex_spectrum():
    rot = FirstOrderSystem(([[0.0, -1.0], [1.0, 0.0]],))
    rep = check_hyperbolicity(rot)
    assert not rep.passed
    assert rep.worst_defect == pytest.approx(1.0)


def test_semisimple_defect_identity_cluster():
    ok, defect = semisimple_defect(np.eye(3))
    assert ok and defect == 0.0


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 3),
       st.floats(0.01, 100.0))
def test_symmetric_systems_always_hyperbolic(seed, n, d, scale):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(d):
        X = rng.standard_normal((n, n))
        mats.append(X + X.T)
    sys = FirstOrderSystem(tuple(mats))
    base = check_hyperbolicity(sys, sphere_samples=40)
    assert base.passed
    assert check_hyperbolicity(sys.scaled(scale), sphere_samples=40).passed == base.passed


def test_hyperbolicity_sign_symmetry():
    sys = FirstOrderSystem(([[1.0, 1.0], [0.0, 1.0]], np.eye(2)))
    neg = FirstOrderSystem(tuple(-a for a in sys.A))
    assert check_hyperbolicity(sys).passed == check_hyperbolicity(neg).passed


def test_parse_wave_document():
    doc = {"n": 2, "d": 1, "A": [WAVE], "boundary": {"k": 1, "matrix": [[1, 0]]}}
    sys, b = parse_system(doc)
    assert np.array_equal(sys.normal, np.array(WAVE))
    assert b.k == 1 and np.array_equal(b.matrix, np.array([[1, 0]], dtype=complex))


def test_parse_rejects_wrong_length():
    with pytest.raises(SchemaError):
        parse_system({"n": 2, "d": 1, "A": [WAVE, WAVE]})


@pytest.mark.parametrize("doc", [
    {"n": 2, "d": 1},
    {"n": 2, "d": 1, "A": [WAVE], "extra": 1},
    {"n": "2", "d": 1, "A": [WAVE]},
    {"n": 2, "d": 1, "A": [[[0, 1], [1]]]},
    {"n": 2, "d": 1, "A": [[[0, [1, 1]], [1, 0]]]},
    {"n": 2, "d": 1, "A": [WAVE], "boundary": {"k": 1}},
    {"n": 2, "d": 1, "A": [WAVE], "boundary": {"k": 1, "matrix": [[1, 0]], "symbol": "x"}},
    {"n": 2, "d": 1, "A": [WAVE], "boundary": {"k": 1, "symbol": "nope"}},
])
def test_parse_schema_errors(doc):
    with pytest.raises(SchemaError):
        parse_system(doc)


def test_named_symbol():
    doc = {"n": 2, "d": 1, "A": [WAVE],
           "boundary": {"k": 1, "symbol": "scaled-dirichlet",
                        "params": {"rows": [[1, 0]], "beta": 2.0}}}
    _, b = parse_system(doc)
    assert not b.constant
    f = Frequency(0.0, (), 1.0)
    # |Lambda| = gamma here, so the row is divided by 1 + beta
    assert np.allclose(b(f), [[1.0 / 3.0, 0.0]])
    b.spot_check([Frequency(t, (), g) for t in (-3, 0, 2) for g in (0.1, 1, 9)])


def test_frequency_mix_bound():
    b = make_symbol("frequency-mix", 1, 2, {"rows": [[1, 0]], "mix": [[0, 1]], "eps": 0.3})
    b.spot_check([Frequency(t, (), g) for t in (-5, 0.5, 4) for g in (0.01, 1, 50)])


def test_boundary_shape_enforced():
    bad = BoundarySymbol(1, 2, lambda f: np.eye(2))
    with pytest.raises(DimensionMismatch):
        bad(None)


def test_complex_boundary_round_trip():
    doc = {"n": 2, "d": 1, "A": [WAVE], "boundary": {"k": 1, "matrix": [[[1, 2], 0]]}}
    sys, b = parse_system(doc)
    assert b.matrix[0, 0] == 1 + 2j
    again, b2 = parse_system(json.loads(json.dumps(serialize_system(sys, b))))
    assert np.array_equal(b2.matrix, b.matrix)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3))
def test_serialize_round_trip_bit_exact(seed, n, d):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((n, n)) for _ in range(d - 1)]
    mats.append(rng.standard_normal((n, n)) + 3 * np.eye(n))
    sys = FirstOrderSystem(tuple(mats))
    gm = rng.standard_normal((1, n)) + 1j * rng.standard_normal((1, n))
    b = BoundarySymbol.from_matrix(gm, n)
    text = json.dumps(serialize_system(sys, b))
    sys2, b2 = parse_system(text)
    for a, a2 in zip(sys.A, sys2.A):
        assert np.array_equal(a, a2)
    assert np.array_equal(b.matrix, b2.matrix)


def test_frequency_invariants():
    with pytest.raises(ValueError):
        Frequency(0.0, (), 0.0)
    f = Frequency(3.0, (4.0,), 12.0)
    assert f.lam == 12 + 3j
    assert f.magnitude == pytest.approx(13.0)
    assert Frequency.from_vector(f.as_vector()) == f


def test_tangential_direction_unit():
    TangentialDirection((0.6, 0.8))
    with pytest.raises(ValueError):
        TangentialDirection((1.0, 1.0))


def test_sphere_points_prefix_and_norm():
    a = sphere_points(3, 30)
    b = sphere_points(3, 60)
    assert np.array_equal(a, b[:30])
    assert np.allclose(np.linalg.norm(b, axis=1), 1.0)


def test_hemisphere_grid_nested():
    coarse = {tuple(np.round(r, 12)) for r in hemisphere_grid(2, 1e-3, 5)}
    fine = {tuple(np.round(r, 12)) for r in hemisphere_grid(2, 1e-3, 9)}
    assert coarse <= fine
    g = hemisphere_grid(2, 1e-3, 5)
    assert np.allclose(np.linalg.norm(g, axis=1), 1.0)
    assert g[:, -1].min() == pytest.approx(1e-3)
