import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgauss.bratteli import (
    MAIN,
    AfElement,
    LevelError,
    block_trace,
    center_embed,
    center_expectation,
    cond_expectation_block,
    cond_expectation_level,
    connecting_matrix,
    diagram_from_json,
    diagram_to_dot,
    diagram_to_json,
    embed,
    hat,
    is_central,
    node_traces,
    normalized_trace,
    pi_rational,
    tau_at_point,
    trace_field,
)
from ncgauss.farey import farey_level


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def block(*vals):
    return np.diag(np.array(vals, dtype=complex))


def test_connecting_matrices():
    assert connecting_matrix(0).tolist() == [[1, 0], [1, 1], [0, 1]]
    assert connecting_matrix(1).tolist() == [[1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 1, 1], [0, 0, 1]]
    for n in range(12):
        a = connecting_matrix(n)
        assert a.sum(axis=1).max() <= 2
        assert np.array_equal(a @ MAIN.sizes(n), MAIN.sizes(n + 1))


def test_element_validation():
    with pytest.raises(LevelError):
        AfElement(MAIN, 1, (np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1))))
    with pytest.raises(LevelError):
        AfElement(MAIN, 0, (np.zeros((1, 1)),))


def test_embed_one_step_example():
    a, c = np.array([[2.0]]), np.array([[3.0]])
    B = np.arange(4.0).reshape(2, 2)
    x = AfElement(MAIN, 1, (a, B, c))
    y = embed(x, 2)
    assert [b.shape[0] for b in y.blocks] == [1, 3, 2, 3, 1]
    assert np.array_equal(y.blocks[1][:1, :1], a) and np.array_equal(y.blocks[1][1:, 1:], B)
    assert np.array_equal(y.blocks[3][:2, :2], B) and np.array_equal(y.blocks[3][2:, 2:], c)
    assert np.count_nonzero(y.blocks[1][:1, 1:]) == 0


def test_embed_is_unital_star_homomorphism(rng):
    for m in range(5):
        assert embed(AfElement.identity(m), m + 2).allclose(AfElement.identity(m + 2), 0)
        x, y = AfElement.random(m, rng), AfElement.random(m, rng)
        assert embed(x * y, m + 2).distance(embed(x, m + 2) * embed(y, m + 2)) < 1e-13
        assert embed(x.H, m + 1).allclose(embed(x, m + 1).H, 0)
    with pytest.raises(LevelError):
        embed(AfElement.identity(3), 2)


def test_block_trace_examples():
    x = AfElement(MAIN, 1, (block(1), block(1, 0), block(0)))
    assert block_trace(x, 2, 1) == pytest.approx(2 / 3)
    assert block_trace(AfElement.identity(3), 2, 3) == pytest.approx(1)
    with pytest.raises(IndexError):
        block_trace(x, 1, 3)


def test_trace_consistency_along_even_descendants(rng):
    for _ in range(30):
        m = int(rng.integers(0, 4))
        x = AfElement.random(m, rng)
        n = m + int(rng.integers(0, 3))
        ell = int(rng.integers(1, 4))
        k = int(rng.integers(0, 2**n + 1))
        big = embed(x, n + ell)
        assert abs(normalized_trace(embed(x, n).blocks[k]) - normalized_trace(big.blocks[2**ell * k])) < 1e-12


def test_counterexample_to_uniform_copy_averaging():
    # the even-descendant expectation keeps tau_(1,0) = 0 on this element
    x = AfElement(MAIN, 1, (block(0), block(1, 0), block(0)))
    e = cond_expectation_level(embed(x, 2), 1)
    assert normalized_trace(e.blocks[0]) == 0
    assert block_trace(x, 1, 0) == 0


def test_trace_field_examples():
    x = AfElement(MAIN, 1, (block(0), block(1, 1), block(0)))
    fx = trace_field(x)
    assert fx(F(1, 3)) == pytest.approx(2 / 3)
    assert fx(1 / 3) == pytest.approx(2 / 3)
    assert np.allclose(fx(np.linspace(0, 1, 9)), hat(1, 1)(np.linspace(0, 1, 9)))
    assert np.allclose(trace_field(AfElement.identity(3)).values, 1)


def test_trace_field_matches_deep_embedding(rng):
    for n in range(4):
        x = AfElement.random(n, rng)
        fx = trace_field(x)
        for ell in range(1, 4):
            deep = node_traces(embed(x, n + ell))
            assert np.max(np.abs(deep - fx(farey_level(n + ell).values))) < 1e-12


def test_hat_values():
    b = hat(1, 1)
    assert b(F(1, 2)) == 1
    assert b(F(0)) == 0 and b(F(1)) == 0
    assert b(1 / 3) == pytest.approx(2 / 3)
    assert hat(2, 1)(F(0)) == 0
    with pytest.raises(ValueError):
        hat(2, 0)


def test_tau_at_point_and_path_evaluation(rng):
    x = AfElement.random(3, rng)
    for k, r in enumerate(farey_level(3).nodes):
        assert abs(tau_at_point(r, x) - normalized_trace(x.blocks[k])) < 1e-13
    assert abs(tau_at_point(2**-0.5, AfElement.identity(2)) - 1) < 1e-15
    lev = farey_level(3)
    theta = 2**-0.5
    i = int(np.searchsorted(lev.values, theta)) - 1
    w = (theta - lev.values[i]) / (lev.values[i + 1] - lev.values[i])
    expect = (1 - w) * normalized_trace(x.blocks[i]) + w * normalized_trace(x.blocks[i + 1])
    assert abs(tau_at_point(theta, x) - expect) < 1e-13


def test_pi_rational(rng):
    a, c = np.array([[2.0]]), np.array([[5.0]])
    B = rng.standard_normal((2, 2))
    x = AfElement(MAIN, 1, (a, B, c))
    assert np.array_equal(pi_rational(x, F(1, 2)), B)
    assert np.allclose(pi_rational(x, F(2, 5)), embed(x, 3).blocks[3])
    y = AfElement.random(2, rng)
    for r in (F(1, 3), F(3, 8), F(5, 13), F(0), F(1)):
        assert np.allclose(pi_rational(x * y, r), pi_rational(x, r) @ pi_rational(y, r), atol=1e-12)
        assert abs(normalized_trace(pi_rational(y, r)) - tau_at_point(r, y)) < 1e-13


def test_conditional_expectations(rng):
    for m in range(4):
        y = AfElement.random(m, rng)
        assert cond_expectation_level(embed(y, m + 3), m).allclose(y, 0)
        z = AfElement.random(m + 2, rng)
        a, b = AfElement.random(m, rng), AfElement.random(m, rng)
        lhs = cond_expectation_level(embed(a, m + 2) * z * embed(b, m + 2), m)
        assert lhs.distance(a * cond_expectation_level(z, m) * b) < 1e-12
        assert cond_expectation_level(z.H, m).allclose(cond_expectation_level(z, m).H, 0)
        p = AfElement.random(m + 2, rng, kind="psd")
        assert cond_expectation_level(p, m).min_eigenvalue() > -1e-12
        assert cond_expectation_level(cond_expectation_level(z, m + 1), m).allclose(cond_expectation_level(z, m), 0)


def test_block_expectation(rng):
    x = AfElement.random(3, rng)
    e = cond_expectation_block(AfElement.identity(3), 2, 1)
    assert np.allclose(e.blocks[1], np.eye(3)) and not e.blocks[0].any()
    for k in range(5):
        e = cond_expectation_block(x, 2, k)
        assert abs(normalized_trace(e.blocks[k]) - block_trace(x, 2, k)) < 1e-13
        lhs = cond_expectation_block(cond_expectation_level(x, 2), 2, k)
        rhs = cond_expectation_level(cond_expectation_block(x, 2, k), 2)
        assert lhs.allclose(rhs, 0)


def test_center_embed_and_expectation():
    z = center_embed(lambda t: t, 1)
    assert [normalized_trace(b) for b in z.blocks] == [0, 0.5, 1]
    assert center_embed(lambda t: 3.0, 2).allclose(3.0 * AfElement.identity(2), 0)
    f, g = (lambda t: t * t), (lambda t: 1 - t)
    assert (center_embed(f, 3) * center_embed(g, 3)).allclose(center_embed(lambda t: f(t) * g(t), 3), 1e-15)
    x = AfElement(MAIN, 1, (block(0), block(1, 1), block(0)))
    ez = center_expectation(x, 2)
    assert is_central(ez)
    assert np.allclose([normalized_trace(b) for b in ez.blocks], [0, 2 / 3, 1, 2 / 3, 0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_center_expectation_preserves_block_traces(m, seed):
    rng = np.random.default_rng(seed)
    x = AfElement.random(m, rng)
    N = m + 2
    ez = center_expectation(x, N)
    for n in range(N + 1):
        for k in range(2**n + 1):
            assert abs(block_trace(ez, n, k) - block_trace(x, n, k)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_trace_field_linear_positive(m, seed):
    rng = np.random.default_rng(seed)
    x, y = AfElement.random(m, rng), AfElement.random(m, rng)
    assert np.allclose(trace_field(x + 2 * y).values, trace_field(x).values + 2 * trace_field(y).values)
    p = AfElement.random(m, rng, kind="psd")
    assert np.all(trace_field(p).values.real >= -1e-14)


def test_diagram_export_roundtrip():
    text = diagram_to_json(MAIN, 3)
    d = diagram_from_json(text)
    assert [list(lev["labels"]) for lev in d["levels"]] == [list(farey_level(n).nodes) for n in range(3)]
    assert np.array_equal(d["edges"][1], connecting_matrix(1))
    assert json.loads(text)["levels"][2]["sizes"] == [1, 3, 2, 3, 1]
    dot = diagram_to_dot(MAIN, 3)
    assert '"n2_1" [label="1/3\\n3"]' in dot
    assert '"n0_0" -> "n1_1"' in dot
