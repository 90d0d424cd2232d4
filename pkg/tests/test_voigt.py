import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog.errors import NotSPDError
from homog.voigt import (heaviside, invariants, macaulay,
                         principal_decomposition, principal_values,
                         pseudoinverse, spd_sqrt, spectral_split)

finite = st.floats(min_value=-1e8, max_value=1e8,
                   allow_nan=False, allow_infinity=False)


def test_heaviside_branches():
    assert heaviside(0.0) == 0.0
    assert heaviside(-2.0) == 0.0
    assert heaviside(1e-12) == 1.0
    np.testing.assert_array_equal(heaviside(np.array([-1.0, 0.0, 3.0])),
                                  [0.0, 0.0, 1.0])


def test_macaulay():
    assert macaulay(-3.0) == 0.0
    assert macaulay(0.0) == 0.0
    assert macaulay(4.2) == 4.2


def test_principal_decomposition_diagonal():
    pair = principal_decomposition([5.0, 0.0, 0.0])
    assert pair.values == (5.0, 0.0)
    np.testing.assert_allclose(pair.directions, np.eye(2), atol=1e-15)


def test_principal_decomposition_pure_shear():
    tau = 2.5
    pair = principal_decomposition([0.0, 0.0, tau])
    np.testing.assert_allclose(pair.values, (tau, -tau), rtol=1e-14)
    for n in pair.directions:
        assert abs(abs(n[0]) - np.sqrt(0.5)) < 1e-14  # +-45 degrees


def test_principal_decomposition_hydrostatic_tiebreak():
    pair = principal_decomposition([3.0, 3.0, 0.0])
    assert pair.values == (3.0, 3.0)
    np.testing.assert_allclose(pair.directions, np.eye(2), atol=1e-15)


def _reconstruct(pair):
    (s1, s2), (n1, n2) = pair.values, pair.directions
    t = s1 * np.outer(n1, n1) + s2 * np.outer(n2, n2)
    return np.array([t[0, 0], t[1, 1], t[0, 1]])


@given(finite, finite, finite)
@settings(max_examples=200, deadline=None)
def test_principal_reconstruction(sxx, syy, sxy):
    s = np.array([sxx, syy, sxy])
    pair = principal_decomposition(s)
    assert pair.values[0] >= pair.values[1]
    np.testing.assert_allclose(pair.directions @ pair.directions.T,
                               np.eye(2), atol=1e-12)
    np.testing.assert_allclose(_reconstruct(pair), s,
                               atol=1e-10 * (np.linalg.norm(s) + 1.0))


def test_split_pure_tension():
    pos, neg = spectral_split([7.0, 0.0, 0.0])
    np.testing.assert_allclose(pos, [7.0, 0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(neg, 0.0, atol=1e-14)


def test_split_pure_shear():
    tau = 3.0
    pos, neg = spectral_split([0.0, 0.0, tau])
    np.testing.assert_allclose(pos, [tau / 2, tau / 2, tau / 2], rtol=1e-14)
    np.testing.assert_allclose(neg, [-tau / 2, -tau / 2, tau / 2], rtol=1e-14)


def test_split_all_compressive():
    s = np.array([-4.0, -9.0, 0.0])
    pos, neg = spectral_split(s)
    np.testing.assert_allclose(pos, 0.0, atol=1e-14)
    np.testing.assert_allclose(neg, s, atol=1e-14)


def test_split_reconstruction_and_signs_random():
    rng = np.random.default_rng(7)
    s = rng.normal(scale=1e6, size=(10_000, 3))
    pos, neg = spectral_split(s)
    norm = np.linalg.norm(s, axis=1)
    err = np.linalg.norm(pos + neg - s, axis=1)
    assert np.all(err <= 1e-12 * (norm + 1.0))
    pos_min = principal_values(pos)[1]
    neg_max = principal_values(neg)[0]
    assert np.all(pos_min >= -1e-10 * (norm + 1.0))
    assert np.all(neg_max <= 1e-10 * (norm + 1.0))


def test_invariants_uniaxial():
    i1, j2 = invariants([5.0, 0.0, 0.0])
    assert i1 == 5.0
    np.testing.assert_allclose(np.sqrt(3.0 * j2), 5.0, rtol=1e-14)


def test_invariants_equibiaxial():
    # direct evaluation of the 3D deviator with s_zz = 0: J2 = p^2/3
    p = 2.0
    i1, j2 = invariants([p, p, 0.0])
    assert i1 == 2 * p
    np.testing.assert_allclose(j2, p * p / 3.0, rtol=1e-14)


def test_invariants_pure_shear():
    i1, j2 = invariants([0.0, 0.0, 1.5])
    assert i1 == 0.0
    np.testing.assert_allclose(j2, 1.5 ** 2, rtol=1e-14)


def test_spd_sqrt_identity_and_diag():
    np.testing.assert_allclose(spd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(spd_sqrt(np.diag([4.0, 9.0, 16.0])),
                               np.diag([2.0, 3.0, 4.0]), rtol=1e-14)


def test_spd_sqrt_random_spd():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.normal(size=(3, 3))
        m = a @ a.T + 3.0 * np.eye(3)
        r = spd_sqrt(m)
        np.testing.assert_allclose(r, r.T, atol=1e-12 * np.linalg.norm(r))
        np.testing.assert_allclose(r @ r, m, rtol=1e-10)


def test_spd_sqrt_rejects_non_spd():
    with pytest.raises(NotSPDError):
        spd_sqrt(np.diag([1.0, -2.0, 3.0]))
    with pytest.raises(NotSPDError):
        spd_sqrt(np.array([[1.0, 5.0, 0.0],
                           [0.0, 1.0, 0.0],
                           [0.0, 0.0, 1.0]]))


def test_pseudoinverse_invertible():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 3)) + 4.0 * np.eye(3)
    np.testing.assert_allclose(pseudoinverse(a), np.linalg.inv(a), rtol=1e-8)


def test_pseudoinverse_full_row_rank_right_inverse():
    rng = np.random.default_rng(13)
    a = rng.normal(size=(3, 26))
    np.testing.assert_allclose(a @ pseudoinverse(a), np.eye(3), atol=1e-10)


def test_pseudoinverse_zero():
    np.testing.assert_array_equal(pseudoinverse(np.zeros((3, 4))),
                                  np.zeros((4, 3)))


def test_pseudoinverse_moore_penrose_conditions():
    rng = np.random.default_rng(17)
    for shape in [(3, 5), (5, 3), (4, 4)]:
        a = rng.normal(size=shape)
        ap = pseudoinverse(a)
        scale = np.linalg.norm(a)
        np.testing.assert_allclose(a @ ap @ a, a, atol=1e-8 * scale)
        np.testing.assert_allclose(ap @ a @ ap, ap, atol=1e-8 / scale)
        np.testing.assert_allclose(a @ ap, (a @ ap).T, atol=1e-8)
        np.testing.assert_allclose(ap @ a, (ap @ a).T, atol=1e-8)
