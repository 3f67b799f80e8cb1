import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgauss.bratteli import AfElement, center_embed
from ncgauss.farey import branch_map, farey_level, gauss_measure
from ncgauss.gauss_nc import H_s, nc_gauss
from ncgauss.states import (
    PHI,
    TAU,
    IntegratedState,
    PointState,
    branch_of,
    branch_sum_check,
    commutative_restriction_check,
    gns_inner,
    gram_matrix,
    intertwine_branch_check,
    isometry_branch_check,
    phi_point,
    tau_point,
    thm5_branch_check,
    window_integral_direct,
)
from ncgauss.transfer import BranchWeights
from ncgauss.quadrature import integrate_mu


@pytest.fixture
def rng():
    return np.random.default_rng(13)


def test_branch_of():
    assert branch_of(F(0)) == 0
    assert branch_of(F(1, 2)) == 2
    assert branch_of(F(2, 5)) == 2
    assert branch_of(F(1)) == 1
    assert branch_of(0.5) == 2
    assert branch_of(0.34) == 2
    assert branch_of(1 / 3) == 3


def test_states_are_unital(rng):
    one = AfElement.identity(3)
    assert TAU(one) == pytest.approx(1, abs=1e-14)
    assert PHI(one) == pytest.approx(1, abs=1e-12)
    for theta in (F(0), F(2, 5), 0.77, F(1)):
        assert phi_point(one, theta) == pytest.approx(1, abs=1e-14)
        assert tau_point(one, theta) == pytest.approx(1, abs=1e-14)


def test_tau_on_center():
    z = center_embed(lambda t: t, 2)
    assert TAU(z) == pytest.approx(1 / math.log(2) - 1, abs=1e-14)


def test_phi_of_h_one(rng):
    # phi_theta normalizes tau_theta(H_s(1)) = s theta
    for s in (1, 2, 3):
        h = H_s(AfElement.identity(2), s)
        for u in farey_level(2).nodes[1:-1]:
            theta = branch_map(s, u)
            assert tau_point(h, theta) == pytest.approx(s * float(theta), abs=1e-14)


def test_phi_module_property(rng):
    for _ in range(5):
        x = AfElement.random(2, rng)
        c = rng.standard_normal(3)
        f = lambda t: np.polynomial.polynomial.polyval(t, c)  # noqa: E731
        z = center_embed(f, 6)
        for theta in (F(2, 5), F(3, 7), F(5, 8), F(1, 4)):
            assert abs(phi_point(z * x, theta) - f(float(theta)) * phi_point(x, theta)) < 1e-10


def test_tau_is_tracial_phi_is_not(rng):
    diffs = []
    for m in range(6):
        x, y = AfElement.random(m, rng), AfElement.random(m, rng)
        assert abs(TAU(x * y) - TAU(y * x)) < 1e-10
        diffs.append(abs(PHI(x * y) - PHI(y * x)))
    assert max(diffs) > 1e-6


def test_gns_forms(rng):
    one = AfElement.identity(1)
    assert gns_inner(TAU, one, one) == pytest.approx(1)
    elems = [AfElement.random(2, rng) for _ in range(5)]
    for state in (TAU, PHI, PointState("phi", F(3, 8)), PointState("trace", 0.3)):
        g = gram_matrix(state, elems)
        assert np.allclose(g, g.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(0.5 * (g + g.conj().T)).min() > -1e-10
        x, y = elems[0], elems[1]
        assert abs(gns_inner(state, x, y)) ** 2 <= gns_inner(state, x, x).real * gns_inner(state, y, y).real + 1e-12


def test_state_validation():
    with pytest.raises(ValueError):
        PointState("other", 0.5)
    with pytest.raises(ValueError):
        IntegratedState("other")
    assert PointState("phi", F(2, 5)).branch == 2


def test_branch_identities_identity_element():
    one = AfElement.identity(0)
    for s in (1, 2, 5):
        mass = gauss_measure(1 / (s + 1), 1 / s)
        r = thm5_branch_check(one, s)
        assert r.lhs == pytest.approx(mass, abs=1e-12) and r.rhs == pytest.approx(mass, abs=1e-12)
        r = isometry_branch_check(one, s)
        assert r.rhs == pytest.approx(integrate_mu(BranchWeights(s)), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_branch_identities_random(s, m, seed):
    rng = np.random.default_rng(seed)
    x, y, z = (AfElement.random(m, rng) for _ in range(3))
    assert isometry_branch_check(x, s).abs_err <= 1e-8
    assert intertwine_branch_check(x, y, z, s).abs_err <= 1e-7
    assert thm5_branch_check(x, s).abs_err <= 1e-8


def test_intertwine_special_cases(rng):
    x = AfElement.random(2, rng)
    one = AfElement.identity(0)
    for s in (1, 3):
        a = intertwine_branch_check(one, x, x, s)
        b = isometry_branch_check(x, s)
        assert a.lhs == pytest.approx(b.lhs, abs=1e-12)
        z = center_embed(lambda t: t * t, 2 + s)
        c = intertwine_branch_check(z, one, one, s)
        assert c.passed


def test_commutative_restriction():
    r = commutative_restriction_check(lambda t: t, 1)
    oracle = 1 - 2 * math.log2(4 / 3)
    assert r.lhs.real == pytest.approx(oracle, abs=1e-8)
    assert window_integral_direct(lambda t: t, 1) == pytest.approx(oracle, abs=1e-12)
    ones = commutative_restriction_check(lambda t: 1.0, 2)
    assert ones.lhs.real == pytest.approx(gauss_measure(1 / 3, 1 / 2), abs=1e-12)
    rng = np.random.default_rng(2)
    for s in range(1, 6):
        c = rng.standard_normal(5)
        r = commutative_restriction_check(lambda t, c=c: np.polynomial.polynomial.polyval(t, c), s, test=lambda v: 1 + v)
        assert r.passed


def test_branch_sums(rng):
    for m in range(3):
        x = AfElement.random(m, rng)
        for r in branch_sum_check(x, 4):
            assert r.passed
    x = AfElement.random(2, rng)
    g, tail = nc_gauss(x, 4)
    assert abs(PHI(x) - TAU(g)) <= 2 * tail + PHI.tail_bound(x)
