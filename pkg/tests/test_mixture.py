import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab.mixture import (
    Mixture,
    MixtureError,
    drop_one_spin,
    genericity_report,
    inner_sphere,
    restrict,
    restrict_two,
    restriction_coeffs,
)

mixtures = st.dictionaries(st.integers(1, 10), st.floats(0.01, 3.0), min_size=1, max_size=5).map(Mixture)


def test_eval_examples():
    assert Mixture({3: 1.0})(1.0) == 1.0
    assert Mixture({2: 1.0})(0.3, 1) == pytest.approx(0.6, abs=1e-15)
    assert Mixture({2: 0.5, 4: 0.5})(0.5) == pytest.approx(0.15625, abs=1e-15)


def test_derivatives_against_finite_differences():
    m = Mixture({2: 0.3, 3: 0.5, 5: 0.2})
    x, h = 0.37, 1e-5
    for order in (1, 2, 3):
        fd = (m(x + h, order - 1) - m(x - h, order - 1)) / (2 * h)
        assert m(x, order) == pytest.approx(fd, rel=1e-8)


def test_invalid_coefficients():
    with pytest.raises(MixtureError, match="coeffs.2"):
        Mixture({2: -1.0})
    with pytest.raises(MixtureError):
        Mixture({2: 0.0})
    with pytest.raises(MixtureError):
        Mixture({0: 1.0})
    with pytest.raises(MixtureError):
        Mixture({2: float("nan")})


def test_restrict_hand_expansion():
    # nu = x^2, q = 1/2: alpha_1^2 = 2 q (1-q) = 1/2, alpha_2^2 = (1-q)^2 = 1/4
    r = restrict(Mixture({2: 1.0}), 0.5)
    assert r.coeffs == pytest.approx({1: 0.5, 2: 0.25}, abs=1e-15)
    assert r.variance == pytest.approx(0.75, abs=1e-15)
    a = restriction_coeffs(Mixture({2: 1.0}), 0.5, include_zero=True)
    assert a[0] == pytest.approx(0.25)


def test_restrict_small_q_recovers_coefficients():
    m = Mixture({2: 0.4, 3: 0.6, 6: 0.1})
    r = restrict(m, 1e-12)
    for p, c in m.coeffs.items():
        assert abs(r.coeffs.get(p, 0.0) - c) <= 1e-9


def test_restrict_rejects_boundary():
    with pytest.raises(MixtureError):
        restrict(Mixture({2: 1.0}), 0.0)
    with pytest.raises(MixtureError):
        restrict(Mixture({2: 1.0}), 1.0)


@settings(max_examples=200, deadline=None)
@given(mixtures, st.floats(0.001, 0.999), st.floats(-1.0, 1.0))
def test_resummation_identity(m, q, x):
    lhs = restrict(m, q)(x)
    rhs = m(q + (1 - q) * x) - m(q)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=200, deadline=None)
@given(mixtures, st.floats(0.001, 0.999))
def test_two_form_identity(m, q):
    a = restriction_coeffs(m, q, include_zero=True)
    lhs = m.variance - a[0] - a[1]
    rhs = m.variance - m(q) - (1 - q) * m(q, 1)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=100, deadline=None)
@given(mixtures)
def test_variance_is_value_at_one(m):
    assert m(1.0) == pytest.approx(m.variance, rel=1e-14)
    assert all(c > 0 for c in m.coeffs.values())


def test_drop_one_spin():
    assert drop_one_spin(Mixture({1: 0.5, 2: 0.25})).coeffs == {2: 0.25}
    assert drop_one_spin(Mixture({2: 1.0})).coeffs == {2: 1.0}
    with pytest.raises(MixtureError):
        drop_one_spin(Mixture({1: 0.3}))


def test_restrict_two_drops_field_term():
    r = restrict_two(Mixture({2: 1.0}), 0.5)
    assert r.coeffs == pytest.approx({2: 0.25})


def test_inner_sphere():
    assert inner_sphere(Mixture({3: 1.0}), 0.5).coeffs == pytest.approx({3: 0.125})
    m = Mixture({2: 0.5, 3: 0.5})
    assert inner_sphere(m, 1.0).coeffs == m.coeffs
    assert inner_sphere(m, 0.25).coeffs == pytest.approx({2: 0.03125, 3: 0.0078125})


def test_genericity_report():
    r = genericity_report(Mixture({2: 1.0, 3: 1.0}))
    assert r["odd_represented"] and r["even_represented"] and not r["generic"]
    assert not genericity_report(Mixture({2: 1.0, 4: 1.0}))["odd_represented"]
    assert not genericity_report(Mixture({3: 1.0}))["even_represented"]


def test_json_roundtrip():
    m = Mixture({2: 0.5, 4: 0.5})
    assert Mixture.from_json(m.to_json()) == m
    with pytest.raises(MixtureError):
        Mixture.from_json({"two": 1.0})


def test_degree_cap():
    with pytest.raises(MixtureError):
        Mixture({33: 1.0})
    assert Mixture({32: 1.0}).p_max == 32


def test_vectorized_eval():
    m = Mixture({2: 1.0, 3: 0.5})
    x = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(m(x), x**2 + 0.5 * x**3, rtol=0, atol=1e-15)
    assert math.isclose(m(0.0), 0.0)
