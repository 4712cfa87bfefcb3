import numpy as np
import pytest

from netcrit.errors import DimensionMismatch
from netcrit.poly import (
    Polynomial,
    PolySystem,
    differentiate,
    evaluate,
    format_complex,
    hessian_at,
    jacobian_at,
    parse_complex,
)

from oracles import gradient_fd


def w(i, n):
    return Polynomial.variable(i, n)


def random_poly(rng, nvars, nterms=6, maxdeg=3):
    terms = {}
    for _ in range(nterms):
        exps = tuple(int(e) for e in rng.integers(0, maxdeg + 1, nvars))
        terms[exps] = complex(rng.standard_normal(), rng.standard_normal())
    return Polynomial(terms, nvars)


def test_evaluate_simple():
    p = w(0, 2) * w(1, 2) - 1.0
    assert evaluate(p, [1.0, 1.0]) == 0.0
    assert evaluate(p, [2.0, 3.0]) == 5.0


def test_evaluate_dimension_mismatch():
    p = w(0, 2) * w(1, 2)
    with pytest.raises(DimensionMismatch):
        evaluate(p, [1.0, 2.0, 3.0])


def test_differentiate_power():
    p = w(0, 2) * w(0, 2) * w(1, 2)
    assert differentiate(p, 0) == 2.0 * w(0, 2) * w(1, 2)


def test_differentiate_constant():
    p = Polynomial.constant(4.2, 3)
    assert differentiate(p, 0).is_zero()


def test_differentiate_matches_finite_differences():
    rng = np.random.default_rng(23)
    for _ in range(50):
        nvars = int(rng.integers(1, 5))
        p = random_poly(rng, nvars)
        point = 0.5 * (rng.standard_normal(nvars) + 1j * rng.standard_normal(nvars))
        exact = np.array([evaluate(differentiate(p, j), point) for j in range(nvars)])
        approx = gradient_fd(lambda z: evaluate(p, z), point)
        scale = max(1.0, np.max(np.abs(exact)))
        assert np.max(np.abs(exact - approx)) < 1e-6 * scale


def test_jacobian_diagonal_system():
    sys = PolySystem([w(0, 2) * w(0, 2) - 1.0, w(1, 2) * w(1, 2) - 4.0])
    jac = jacobian_at(sys, [1.0, 2.0])
    assert np.allclose(jac, [[2.0, 0.0], [0.0, 4.0]])


def test_jacobian_at_origin():
    sys = PolySystem([w(0, 2) * w(1, 2)])
    assert np.allclose(jacobian_at(sys, [0.0, 0.0]), [[0.0, 0.0]])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(29)
    for _ in range(20):
        nvars = int(rng.integers(2, 5))
        sys = PolySystem([random_poly(rng, nvars) for _ in range(nvars)])
        point = 0.5 * (rng.standard_normal(nvars) + 1j * rng.standard_normal(nvars))
        jac = jacobian_at(sys, point)
        for i, p in enumerate(sys):
            approx = gradient_fd(lambda z: evaluate(p, z), point)
            scale = max(1.0, np.max(np.abs(jac[i])))
            assert np.max(np.abs(jac[i] - approx)) < 1e-6 * scale


def test_hessian_hand_cases():
    p = 0.5 * (w(0, 2) * w(1, 2) - 1.0) * (w(0, 2) * w(1, 2) - 1.0)
    assert np.allclose(hessian_at(p, [1.0, 1.0]), [[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(hessian_at(p, [0.0, 0.0]), [[0.0, -1.0], [-1.0, 0.0]])


def test_hessian_exact_symmetry():
    rng = np.random.default_rng(31)
    for _ in range(10):
        p = random_poly(rng, 3)
        point = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        h = hessian_at(p, point)
        assert np.array_equal(h, h.T)


def test_mixed_partials_commute_exactly():
    rng = np.random.default_rng(37)
    for _ in range(200):
        nvars = int(rng.integers(2, 5))
        p = random_poly(rng, nvars)
        i, j = rng.integers(0, nvars, 2)
        assert differentiate(differentiate(p, i), j) == differentiate(differentiate(p, j), i)


def test_evaluate_is_ring_homomorphism():
    rng = np.random.default_rng(41)
    for _ in range(50):
        nvars = int(rng.integers(1, 4))
        p = random_poly(rng, nvars, nterms=4)
        q = random_poly(rng, nvars, nterms=4)
        point = 0.5 * (rng.standard_normal(nvars) + 1j * rng.standard_normal(nvars))
        lhs = evaluate(p * q, point)
        rhs = evaluate(p, point) * evaluate(q, point)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_serialization_round_trip_bit_exact():
    rng = np.random.default_rng(43)
    for _ in range(30):
        nvars = int(rng.integers(1, 5))
        p = random_poly(rng, nvars)
        lines = p.to_lines()
        q = Polynomial.from_lines(lines, nvars)
        assert q == p
        assert q.to_lines() == lines


def test_complex_format_round_trip():
    rng = np.random.default_rng(47)
    for _ in range(100):
        z = complex(rng.standard_normal() * 10.0 ** float(rng.integers(-8, 8)), rng.standard_normal())
        assert parse_complex(format_complex(z)) == z


def test_batch_evaluator_matches_scalar():
    rng = np.random.default_rng(53)
    sys = PolySystem([random_poly(rng, 3) for _ in range(3)])
    pts = rng.standard_normal((17, 3)) + 1j * rng.standard_normal((17, 3))
    vals, jacs = sys.evaluator().values_and_jacobians(pts)
    for b in range(17):
        expected = [evaluate(p, pts[b]) for p in sys]
        assert np.allclose(vals[b], expected, rtol=1e-12, atol=1e-12)
        assert np.allclose(jacs[b], jacobian_at(sys, pts[b]), rtol=1e-12, atol=1e-12)
