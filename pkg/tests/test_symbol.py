import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stationary_dpp.errors import InvalidSymbolError
from stationary_dpp.symbol import (
    Constant,
    FourierTable,
    PiecewiseConstant,
    SpectralSymbol,
    TrigPolynomial,
    covariance,
    field_spectral_density,
    fourier_coeff,
    indicator,
    mean_density,
    parseval_tail,
    riesz_constant_sq,
    symbol_from_dict,
    symbol_hash,
    symbol_to_dict,
)


def quad_mean(f, n=10 ** 6):
    t = (np.arange(n) + 0.5) / n
    return float(np.mean(f(t)))


# -- operation examples ------------------------------------------------------

def test_fourier_sine_k1(sine):
    assert fourier_coeff(sine, 1).real == pytest.approx(1 / math.pi, abs=1e-15)
    assert fourier_coeff(sine, 1).imag == 0.0


def test_fourier_constant_nonzero_lag(bern):
    assert fourier_coeff(bern, 3) == 0


def test_fourier_trig_k1(trig):
    assert fourier_coeff(trig, 1) == 0.125


def test_fourier_sine_even_lags_vanish_exactly(sine):
    k = np.arange(2, 200, 2)
    assert np.all(sine.coeffs(k) == 0)


@pytest.mark.parametrize("name,expected", [("sine", 0.5), ("bern", 0.3), ("trig", 0.5)])
def test_mean_density(name, expected, request):
    assert mean_density(request.getfixturevalue(name)) == pytest.approx(expected, abs=1e-15)


def test_riesz_constant_examples(bern, sine, trig):
    assert riesz_constant_sq(bern) == pytest.approx(0.21, abs=1e-15)
    assert riesz_constant_sq(sine) == 0.0
    # independent oracle: midpoint quadrature of f(1 - f)
    f = trig.evaluate
    oracle = quad_mean(lambda t: f(t) * (1 - f(t)))
    assert oracle == pytest.approx(7 / 32, abs=1e-9)
    assert riesz_constant_sq(trig) == pytest.approx(oracle, abs=1e-9)


def test_riesz_constant_piecewise_quadrature():
    s = SpectralSymbol(PiecewiseConstant(["0", "1/3", "1/2", "1"], [0.2, 0.9, 0.5]))
    f = s.evaluate
    assert riesz_constant_sq(s) == pytest.approx(quad_mean(lambda t: f(t) * (1 - f(t))), abs=1e-6)


def test_covariance_examples(sine, bern):
    assert covariance(sine, 1) == pytest.approx(-1 / math.pi ** 2, abs=1e-15)
    assert covariance(bern, 5) == 0
    for s in (sine, bern):
        assert covariance(s, 0) == pytest.approx(s.sigma - s.sigma ** 2)


def test_field_spectral_density_examples(bern, trig, sine):
    for t in (0.0, 0.3, 0.77):
        assert field_spectral_density(bern, t, 5) == pytest.approx(0.21, abs=1e-15)
    # oracle: sigma - int f^2 by quadrature
    oracle = 0.5 - quad_mean(lambda t: trig.evaluate(t) ** 2)
    assert field_spectral_density(trig, 0.0, 3) == pytest.approx(oracle, abs=1e-9)
    assert field_spectral_density(trig, 0.0, 1) == pytest.approx(0.21875, abs=1e-15)
    vals = [field_spectral_density(sine, 0.0, K) for K in (1, 10, 100, 1000, 10000)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4


def test_field_spectral_density_rejects_2d():
    s = SpectralSymbol([Constant(0.5), Constant(0.5)])
    with pytest.raises(ValueError):
        field_spectral_density(s, 0.0, 3)


def test_tensor_coefficients():
    s = SpectralSymbol([Constant(0.3), indicator("-1/4", "1/4")])
    assert s.dimension == 2
    assert s.sigma == pytest.approx(0.15)
    assert fourier_coeff(s, [0, 1]) == pytest.approx(0.3 / math.pi)
    assert fourier_coeff(s, [1, 1]) == 0


def test_fourier_table_matches_bitwise(trig, sine):
    s = SpectralSymbol([indicator("-1/4", "1/4"), TrigPolynomial([0.5, 0.125])])
    tab = FourierTable(s, 5)
    for k1 in range(-5, 6):
        for k2 in range(-5, 6):
            assert tab[[k1, k2]] == fourier_coeff(s, [k1, k2])
    tab1 = FourierTable(sine, 50)
    k = np.arange(-50, 51)
    assert np.array_equal(tab1.lookup(k), sine.coeffs(k))
    assert np.array_equal(tab1.values[::-1], np.conj(tab1.values))


# -- validation ----------------------------------------------------------------

@pytest.mark.parametrize("bad", [
    lambda: Constant(0.0),
    lambda: Constant(1.0),
    lambda: PiecewiseConstant(["0", "1/2", "1"], [0.5, 1.2]),
    lambda: PiecewiseConstant(["0", "1/2", "1/2", "1"], [0.5, 0.5, 0.5]),
    lambda: PiecewiseConstant(["1/4", "1"], [0.5]),
    lambda: TrigPolynomial([0.5, 0.3]),  # dips below 0
    lambda: TrigPolynomial([0.9, 0.1]),  # exceeds 1
    lambda: SpectralSymbol(PiecewiseConstant(["0", "1"], [1.0])),  # sigma = 1
    lambda: SpectralSymbol(PiecewiseConstant(["0", "1"], [0.0])),  # sigma = 0
])
def test_invalid_symbols_rejected(bad):
    with pytest.raises(InvalidSymbolError):
        bad()


def test_trig_boundary_accepted():
    # f = 1/2 + cos/2 touches 0 and 1 exactly
    s = SpectralSymbol(TrigPolynomial([0.5, 0.25]))
    assert s.sigma == 0.5


def test_indicator_wraparound():
    a = indicator("-1/4", "1/4")
    assert a.breakpoints == (Fraction(0), Fraction(1, 4), Fraction(3, 4), Fraction(1))
    assert list(a.heights) == [1.0, 0.0, 1.0]
    b = indicator("1/10", "3/10")
    assert b.mean == pytest.approx(0.2)


# -- properties ----------------------------------------------------------------

piecewise = st.integers(2, 6).flatmap(lambda m: st.tuples(
    st.lists(st.integers(1, 60), min_size=m - 1, max_size=m - 1, unique=True),
    st.lists(st.floats(0, 1), min_size=m, max_size=m)))


def _make_piecewise(data, den=61):
    cuts, heights = data
    b = [Fraction(0)] + sorted(Fraction(c, den) for c in cuts) + [Fraction(1)]
    return PiecewiseConstant(b, heights)


@settings(max_examples=60, deadline=None)
@given(piecewise)
def test_hermitian_symmetry_exact(data):
    f = _make_piecewise(data)
    k = np.arange(1, 400)
    assert np.array_equal(f.coeffs(-k), np.conj(f.coeffs(k)))


@settings(max_examples=60, deadline=None)
@given(piecewise)
def test_piecewise_decay_bound(data):
    f = _make_piecewise(data)
    k = np.arange(1, 10001)
    C = f.heights.sum() / math.pi
    assert np.all(np.abs(f.coeffs(k)) * k <= C + 1e-12)


@settings(max_examples=60, deadline=None)
@given(piecewise)
def test_coefficients_bounded_by_sigma(data):
    f = _make_piecewise(data)
    if not 0 < f.mean < 1:
        return
    k = np.arange(-300, 301)
    assert np.all(np.abs(f.coeffs(k)) <= f.mean + 1e-15)


trig_coeffs = st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=5)


@settings(max_examples=40, deadline=None)
@given(trig_coeffs)
def test_parseval_consistency(cs):
    c = np.array([complex(a, b) for a, b in cs])
    # scale into a valid symbol: |sum| <= 2 sum |c_k| <= 0.45
    c = 0.45 * c / max(2 * np.sum(np.abs(c)), 1e-12)
    f = TrigPolynomial(np.concatenate([[0.5], c]))
    s = SpectralSymbol(f)
    quad = quad_mean(lambda t: f.evaluate(t) * (1 - f.evaluate(t)), 2 ** 14)
    assert riesz_constant_sq(s) == pytest.approx(quad, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(piecewise, st.floats(0, 1))
def test_spectral_density_sandwich(data, t):
    f = _make_piecewise(data)
    if not 0 < f.mean < 1:
        return
    s = SpectralSymbol(f)
    K = 2000
    eps = parseval_tail(s, K)
    v = field_spectral_density(s, t, K)
    assert riesz_constant_sq(s) - eps - 1e-12 <= v <= s.sigma + eps + 1e-12


# -- serialization ---------------------------------------------------------------

def test_round_trip_documents(sine, trig):
    s = SpectralSymbol([Constant(0.3), indicator("-1/4", "1/4"), TrigPolynomial([0.5, 0.1 + 0.05j])])
    doc = json.loads(json.dumps(symbol_to_dict(s)))
    assert doc["factors"][1]["breakpoints"] == ["0/1", "1/4", "3/4", "1/1"]
    assert doc["factors"][2]["coefficients"][1] == [0.1, 0.05]
    back = symbol_from_dict(doc)
    k = np.array([[1, 1, 1], [0, -3, 1], [0, 0, 0]])
    assert np.array_equal(back.coeffs(k), s.coeffs(k))
    assert symbol_hash(back) == symbol_hash(s)


def test_document_shorthands():
    s = symbol_from_dict({"kind": "indicator", "interval": ["-1/4", "1/4"]})
    assert fourier_coeff(s, 1).real == pytest.approx(1 / math.pi)
    with pytest.raises(InvalidSymbolError):
        symbol_from_dict({"kind": "wavelet"})
    with pytest.raises(InvalidSymbolError):
        symbol_from_dict({"kind": "tensor", "dimension": 3, "factors": [{"kind": "constant", "value": 0.5}]})
