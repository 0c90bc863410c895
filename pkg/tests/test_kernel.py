import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stationary_dpp.errors import (
    DuplicatePointsError,
    NotASubsetError,
    SpectrumOutOfRangeError,
    WindowTooLargeError,
    WindowTooLargeForExactDistributionError,
)
from stationary_dpp.kernel import (
    Box,
    Explicit,
    KernelWindow,
    build_kernel,
    correlation,
    cylinder_probability,
    cylinder_probability_signed,
    exact_distribution,
    gap_probability,
    gap_probability_mp,
    interval,
    log_gap_probability,
)
from stationary_dpp.symbol import (
    Constant,
    SpectralSymbol,
    TrigPolynomial,
    fourier_coeff,
    indicator,
)


def brute_cylinder(M, S, n):
    """Independent oracle: sum over supersets with alternating signs."""
    rest = [i for i in range(n) if i not in S]
    total = 0.0
    for r in range(len(rest) + 1):
        for extra in itertools.combinations(rest, r):
            T = sorted(list(S) + list(extra))
            d = 1.0 if not T else np.linalg.det(M[np.ix_(T, T)])
            total += (-1) ** r * d
    return total


# -- matrix structure ----------------------------------------------------------

def test_toeplitz_entries_exact(sine, trig):
    for s in (sine, trig):
        kw = build_kernel(s, 40)
        M = kw.matrix
        for i in range(40):
            for j in range(40):
                assert M[i, j] == fourier_coeff(s, i - j)


def test_tensor_kernel_is_kronecker():
    s = SpectralSymbol([TrigPolynomial([0.5, 0.125]), indicator("-1/4", "1/4")])
    kw = build_kernel(s, Box([0, 0], [3, 4]))
    A = build_kernel(SpectralSymbol(s.factors[0]), 3).matrix
    B = build_kernel(SpectralSymbol(s.factors[1]), 4).matrix
    assert np.array_equal(kw.matrix, np.kron(A, B))
    # lexicographic order
    assert kw.window.points[:5].tolist() == [[0, 0], [0, 1], [0, 2], [0, 3], [1, 0]]


def test_explicit_window_matches_box(sine):
    pts = [3, -2, 7, 0]
    kw = build_kernel(sine, Explicit(pts))
    order = [-2, 0, 3, 7]
    assert kw.window.points[:, 0].tolist() == order
    for i, a in enumerate(order):
        for j, b in enumerate(order):
            assert kw.matrix[i, j] == fourier_coeff(sine, a - b)


def test_eigen_decomposition(trig):
    kw = build_kernel(trig, 50)
    lam, V = kw.eigenvalues, kw.eigenvectors
    assert np.all(np.diff(lam) <= 0)
    assert np.all((lam >= 0) & (lam <= 1))
    np.testing.assert_allclose(V @ np.diag(lam) @ V.conj().T, kw.matrix, atol=1e-12)
    lazy = build_kernel(trig, 50, decompose=False)
    assert not lazy.is_decomposed
    np.testing.assert_allclose(lazy.eigenvalues, lam, atol=1e-14)


def test_diagonal_kernel(bern):
    kw = build_kernel(bern, 10 ** 5)
    assert kw.is_diagonal
    assert kw.size == 10 ** 5
    small = build_kernel(bern, 5)
    assert np.array_equal(small.matrix, 0.3 * np.eye(5))


def test_window_cap(sine):
    with pytest.raises(WindowTooLargeError):
        build_kernel(sine, 4097)
    with pytest.raises(WindowTooLargeError):
        build_kernel(sine, 100, cap=50)


def test_spectrum_out_of_range_detected():
    # an invalid symbol smuggled past validation: coefficients of 0.5 + 0.4 cos
    bad = TrigPolynomial.__new__(TrigPolynomial)
    bad.c = np.array([0.5, 0.4 + 0j])
    bad.K = 1
    s = SpectralSymbol.__new__(SpectralSymbol)
    object.__setattr__(s, "factors", (bad,))
    with pytest.raises(SpectrumOutOfRangeError):
        build_kernel(s, 64)


def test_dimension_mismatch(sine):
    with pytest.raises(ValueError):
        build_kernel(sine, Box([0, 0], [2, 2]))


# -- correlations ----------------------------------------------------------------

def test_correlation_examples(sine, bern):
    assert correlation(sine, [0, 1]) == pytest.approx(0.25 - 1 / math.pi ** 2, abs=1e-15)
    assert correlation(sine, [0, 2]) == pytest.approx(0.25, abs=1e-15)
    assert correlation(bern, [0, 4, 9]) == pytest.approx(0.027, abs=1e-15)
    assert correlation(sine, []) == 1.0
    with pytest.raises(DuplicatePointsError):
        correlation(sine, [0, 3, 0])


def test_gap_probability_examples(bern, sine):
    assert gap_probability(bern, interval(8)) == pytest.approx(0.7 ** 8, rel=1e-14)
    assert gap_probability(sine, interval(2)) == pytest.approx(0.25 - 1 / math.pi ** 2, abs=1e-15)
    kw = build_kernel(sine, 12)
    assert gap_probability(kw) == pytest.approx(np.linalg.det(np.eye(12) - kw.matrix), rel=1e-10)
    assert log_gap_probability(kw) == pytest.approx(math.log(gap_probability(kw)), rel=1e-12)


def test_gap_probability_mp_agrees(sine):
    for ell in (4, 8, 12):
        mp_val = float(gap_probability_mp(sine, interval(ell)))
        assert mp_val == pytest.approx(gap_probability(sine, interval(ell)), rel=1e-8)


def test_gap_probability_mp_certifies_positivity_beyond_double_precision(sine):
    val = gap_probability_mp(sine, interval(40), dps=80)
    assert val > 0
    assert gap_probability(sine, interval(40)) == 0.0  # double precision underflow


# -- cylinder probabilities --------------------------------------------------------

def test_cylinder_examples(sine, bern):
    W = interval(2)
    assert cylinder_probability(sine, W, []) == pytest.approx(0.25 - 1 / math.pi ** 2, abs=1e-15)
    assert cylinder_probability(sine, W, [0, 1]) == pytest.approx(0.25 - 1 / math.pi ** 2, abs=1e-15)
    assert cylinder_probability(sine, W, [0]) == pytest.approx(0.25 + 1 / math.pi ** 2, abs=1e-15)
    assert cylinder_probability(bern, interval(3), [1]) == pytest.approx(0.3 * 0.49, abs=1e-15)


def test_exact_distribution_against_oracle(sine, trig):
    for s in (sine, trig):
        W = interval(7)
        dist = exact_distribution(s, W)
        M = build_kernel(s, W).matrix
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(dist.probs >= 0)
        for mask in range(1 << 7):
            S = [i for i in range(7) if mask >> i & 1]
            assert dist.probs[mask] == pytest.approx(brute_cylinder(M, S, 7), abs=1e-12)
            assert dist.probs[mask] == pytest.approx(cylinder_probability_signed(s, W, S), abs=1e-12)
        for i in range(7):
            assert dist.marginal(i) == pytest.approx(s.sigma, abs=1e-12)


def test_exact_distribution_2d():
    s = SpectralSymbol([Constant(0.3), indicator("-1/4", "1/4")])
    dist = exact_distribution(s, Box([0, 0], [2, 3]))
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    d = dist.as_dict()
    assert d[frozenset()] == pytest.approx(gap_probability(s, Box([0, 0], [2, 3])), abs=1e-12)
    assert dist[[(0, 0), (1, 2)]] == d[frozenset({(0, 0), (1, 2)})]


def test_cylinder_errors(sine):
    with pytest.raises(WindowTooLargeForExactDistributionError):
        exact_distribution(sine, interval(15))
    with pytest.raises(WindowTooLargeForExactDistributionError):
        cylinder_probability(sine, interval(15), [0])
    with pytest.raises(NotASubsetError):
        cylinder_probability(sine, interval(4), [7])


# -- properties ----------------------------------------------------------------------

symbols = st.sampled_from([
    SpectralSymbol(indicator("-1/4", "1/4")),
    SpectralSymbol(indicator("1/10", "1/3")),
    SpectralSymbol(TrigPolynomial([0.5, 0.125])),
    SpectralSymbol(TrigPolynomial([0.4, 0.1j, 0.05])),
])


@settings(max_examples=40, deadline=None)
@given(symbols, st.lists(st.integers(-30, 30), min_size=1, max_size=8, unique=True), st.integers(-50, 50))
def test_translation_invariance(s, pts, shift):
    a = correlation(s, pts)
    b = correlation(s, [p + shift for p in pts])
    assert a == pytest.approx(b, abs=1e-12)
    assert -1e-12 <= a <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(symbols, st.lists(st.integers(-20, 20), min_size=1, max_size=6, unique=True))
def test_gap_and_correlation_complement(s, pts):
    # inclusion-exclusion: P(no point) = sum_T (-1)^|T| rho(T)
    total = 0.0
    for r in range(len(pts) + 1):
        for T in itertools.combinations(pts, r):
            total += (-1) ** r * correlation(s, list(T))
    assert gap_probability(s, Explicit(pts)) == pytest.approx(total, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(symbols, st.integers(2, 9))
def test_marginals_and_total_mass(s, n):
    dist = exact_distribution(s, interval(n))
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    sizes = np.array([bin(m).count("1") for m in range(1 << n)])
    assert float(np.dot(sizes, dist.probs)) == pytest.approx(n * s.sigma, abs=1e-10)


def test_kernel_window_is_frozen(trig):
    kw = build_kernel(trig, 8)
    assert isinstance(kw, KernelWindow)
    with pytest.raises(ValueError):
        kw.matrix[0, 0] = 1.0
