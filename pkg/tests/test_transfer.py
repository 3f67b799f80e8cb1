import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgauss.quadrature import QuadratureSpec, integrate_mu
from ncgauss.transfer import (
    BranchWeights,
    SpectralError,
    apply_composition,
    apply_transfer,
    conjugation_check,
    gkw_estimate,
    invariance_check,
    isometry_check,
    samples_to_csv,
    tail_weights,
    transfer_matrix,
    transfer_samples,
)

GKW = 0.3036630028987326


def one(t):
    return np.ones_like(np.asarray(t, dtype=float))


def ident(t):
    return np.asarray(t, dtype=float)


def test_branch_weights():
    t = np.linspace(0, 1, 11)
    total = sum(BranchWeights(s)(t) for s in range(1, 51))
    assert np.allclose(1 - total, (t + 1) / (t + 51), atol=1e-15)
    assert np.all((BranchWeights(3)(t) > 0) & (BranchWeights(3)(t) < 1))
    with pytest.raises(ValueError):
        BranchWeights(0)


def test_tail_weight_sums():
    t = np.array([0.0, 0.3, 1.0])
    S = 40
    s = np.arange(S + 1, 400_000, dtype=float)[None, :]
    a = t[:, None] + s
    w = (t[:, None] + 1) / (a * (a + 1))
    T0, T1, T2 = tail_weights(t, S)
    assert np.allclose(T0, (t + 1) / (t + S + 1))
    assert np.allclose(T1, (w / a).sum(axis=1), rtol=1e-9)
    assert np.allclose(T2, (w / a**2).sum(axis=1), rtol=1e-9)


def test_apply_transfer_examples():
    for theta in (0.0, 0.37, 1.0):
        for S in (1, 10, 1000):
            v, bound = apply_transfer(one, theta, S)
            assert v == pytest.approx(1 - (theta + 1) / (theta + S + 1), abs=1e-14)
            assert bound == pytest.approx((theta + 1) / (theta + S + 1))
    assert apply_transfer(ident, 0.0, 1) == (0.5, 0.5)
    v, _ = apply_transfer(one, 0.5, 5, renormalize=True)
    assert v == pytest.approx(1.0)
    with pytest.raises(ValueError):
        apply_transfer(one, 0.5, 0)
    with pytest.raises(ValueError):
        apply_transfer(one, 0.5, 3, tail="other")


def test_unital_within_tail_on_grid():
    theta = np.linspace(0, 1, 101)
    v, bound = apply_transfer(one, theta, 10_000)
    assert np.max(np.abs(v - 1) - bound) <= 1e-12
    assert np.max(bound) <= 2 / 10_002 + 1e-15


def test_pointwise_identity_values():
    # G(id)(theta) = sum_s f_s(theta)/(theta+s), hand sums at three points
    for theta in (0.0, 0.5, 1.0):
        exact = (theta + 1) * (sum(1 / (theta + s) ** 2 for s in range(1, 200_001)) - 1 / (theta + 1) + 1 / (theta + 200_001))
        v, _ = apply_transfer(ident, theta, 2000, tail="taylor")
        assert v == pytest.approx(exact, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 3), min_size=1, max_size=5), st.floats(0, 1))
def test_positivity(coeffs, theta):
    f = lambda t: np.polynomial.polynomial.polyval(t, coeffs)  # noqa: E731
    v, _ = apply_transfer(f, theta, 50)
    assert v >= 0


def test_composition():
    assert apply_composition(one, 0.3) == 1
    assert apply_composition(ident, 0.4) == pytest.approx(0.5)


def test_invariance_examples():
    r = invariance_check(one, S=1000)
    assert r.lhs == pytest.approx(1, abs=1e-14) and r.passed
    r = invariance_check(ident, S=1000)
    assert r.lhs == pytest.approx(1 / math.log(2) - 1, abs=1e-14)
    assert r.rhs == pytest.approx(1 / math.log(2) - 1, abs=1e-9)
    assert invariance_check(lambda t: t * t, S=1000).passed


def test_isometry_and_conjugation():
    rng = np.random.default_rng(5)
    for d in range(7):
        assert isometry_check(lambda t, d=d: np.asarray(t, float) ** d).abs_err <= 1e-8
    c = [rng.standard_normal(4) for _ in range(3)]
    f, g, h = (lambda t, c=cc: np.polynomial.polynomial.polyval(t, c) for cc in c)
    assert conjugation_check(f, g, h).abs_err <= 1e-7
    # f = 1 reduces to invariance of g h
    r = conjugation_check(one, g, h)
    assert r.rhs == pytest.approx(integrate_mu(lambda t: g(t) * h(t)), abs=1e-9)


def test_quadrature_rule_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(level=-1)


def test_transfer_matrix_rows_sum_to_one():
    M = transfer_matrix(100)
    assert np.allclose(np.asarray(M.sum(axis=1)).ravel(), 1, atol=1e-13)


def test_gkw_small_grid_and_convergence():
    coarse, fine = gkw_estimate(200), gkw_estimate(400)
    assert abs(fine.leading - 1) < 1e-10
    assert fine.density_error < 1e-10
    assert abs(fine.modulus - GKW) < abs(coarse.modulus - GKW)
    assert abs(fine.modulus - GKW) < 1e-5
    with pytest.raises(ValueError):
        gkw_estimate(10)
    assert issubclass(SpectralError, RuntimeError)


def test_samples_csv():
    rows = transfer_samples(one, 100, 3)
    text = samples_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "theta,Gf,tail_bound"
    assert len(lines) == 4
    for row in rows:
        assert abs(row[1] - 1) <= row[2] + 1e-15
