"""Weighted centered sums, norm inequalities and polynomial Weyl sums.

For a configuration ``xi`` and weights ``a`` the basic object is

    S = sum_n a_n (xi_n - sigma).

Its L2 norm has an exact expression in terms of the Fourier coefficients of
the symbol; its Lp norms, exponential moments and exponential-sum maxima
are estimated from samples and compared with the analytic bounds.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (
    DegreeTooLargeError,
    IndicatorSymbolError,
    NegativeQuadraticFormError,
    OverflowGuardError,
    WindowTooLargeError,
)
from .kernel import as_window, build_kernel, interval
from .report import Check, ExperimentReport
from .sampler import Configuration, SampleBatch, sample_batch
from .symbol import SpectralSymbol, riesz_constant_sq, symbol_hash

__all__ = [
    "WeightVector",
    "IntPolynomial",
    "Bootstrap",
    "weighted_sum",
    "l2_norm_analytic",
    "empirical_pnorm",
    "subgaussian_margin",
    "khintchine_constant",
    "khintchine_constant_abstract",
    "absolute_pnorm_bound",
    "weyl_sum",
    "weyl_max",
    "weyl_max_batch",
    "salem_littlewood_bound",
    "salem_littlewood_suite",
    "weyl_decay_slopes",
    "random_weights",
]

BOOTSTRAP_RESAMPLES = 200
MAX_EXP_ARG = 500.0


class WeightVector:
    """Finitely supported weights ``a_n`` aligned with a window.

    Parameters
    ----------
    values : array_like, real or complex
    window : Window, int or sequence of sites, optional
        Sites carrying the weights, ``{0, ..., len(values) - 1}`` by default.
    """

    def __init__(self, values, window=None):
        a = np.asarray(values)
        if not np.iscomplexobj(a):
            a = a.astype(float)
        a = np.atleast_1d(a).ravel()
        self.values = a
        self.window = interval(a.size) if window is None else as_window(window)
        if self.window.size != a.size:
            raise ValueError("weights and window differ in length")
        self.norm_sq = float(np.sum(np.abs(a) ** 2))

    @property
    def norm(self):
        return math.sqrt(self.norm_sq)

    @property
    def l1(self):
        return float(np.sum(np.abs(self.values)))

    @property
    def is_real(self):
        return not np.iscomplexobj(self.values)

    def __len__(self):
        return self.values.size


def _weights(a):
    return a if isinstance(a, WeightVector) else WeightVector(a)


class IntPolynomial:
    """Integer polynomial ``P(x) = sum_j c_j x^j`` (coefficients ascending).

    Examples
    --------
    >>> IntPolynomial([0, 0, 1])(np.arange(4))
    array([0, 1, 4, 9])
    """

    def __init__(self, coefficients):
        c = [int(x) for x in coefficients]
        if any(float(x) != y for x, y in zip(coefficients, c)):
            raise ValueError("coefficients must be integers")
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if len(c) < 2:
            raise ValueError("degree must be at least 1")
        self.coefficients = tuple(c)

    @classmethod
    def monomial(cls, degree):
        return cls([0] * degree + [1])

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def __call__(self, n):
        n = np.asarray(n, dtype=np.int64)
        out = np.zeros(n.shape, dtype=np.int64)
        for c in reversed(self.coefficients):
            out = out * n + c
        return out

    def check_nonnegative(self, n_max):
        """Raise unless ``P(n) >= 0`` for ``0 <= n <= n_max``."""
        vals = self(np.arange(int(n_max) + 1))
        if np.any(vals < 0):
            raise ValueError(f"P takes negative values on [0, {n_max}]")

    def __repr__(self):
        return f"IntPolynomial({list(self.coefficients)})"


# ---------------------------------------------------------------------------
# bootstrap

class Bootstrap:
    """Nonparametric bootstrap with a fixed set of resamples.

    Resample ``b`` of ``n`` observations is drawn from the auxiliary stream
    ``derive_seed(master, (stream, b))``; the resampling counts are stored
    once so any number of statistics can be bootstrapped by one matrix
    product.
    """

    def __init__(self, n, master, stream=0, resamples=BOOTSTRAP_RESAMPLES):
        self.n = int(n)
        self.resamples = int(resamples)
        counts = np.empty((self.resamples, self.n))
        for b in range(self.resamples):
            ss = np.random.SeedSequence(int(master), spawn_key=(1, int(stream), b))
            idx = np.random.Generator(np.random.PCG64(ss)).integers(0, self.n, self.n)
            counts[b] = np.bincount(idx, minlength=self.n)
        self.counts = counts

    def means(self, values):
        """Resampled means of each column of ``values`` (shape ``(n, m)``)."""
        values = np.asarray(values)
        return (self.counts @ values) / self.n

    @staticmethod
    def se(stats):
        return np.std(stats, axis=0, ddof=1)


_BOOT_CACHE: dict = {}


def _bootstrap_for(batch_or_n, master, stream=0):
    n = batch_or_n if isinstance(batch_or_n, int) else len(batch_or_n)
    key = (n, int(master), int(stream))
    bs = _BOOT_CACHE.get(key)
    if bs is None:
        _BOOT_CACHE.clear()
        bs = _BOOT_CACHE[key] = Bootstrap(n, master, stream)
    return bs


# ---------------------------------------------------------------------------
# weighted sums and norms

def _bits_matrix(config, a: WeightVector):
    if isinstance(config, SampleBatch):
        bits, window = config.bits, config.window
    elif isinstance(config, Configuration):
        bits, window = config.bits[None, :], config.window
    else:
        bits = np.atleast_2d(np.asarray(config, dtype=bool))
        window = None
    if window is not None and a.window != window:
        idx = window.index_of(a.window.points)
        bits = bits[:, idx]
    elif bits.shape[1] != a.values.size:
        bits = bits[:, :a.values.size]
    return bits


def weighted_sum(config, a, sigma):
    """``S = sum_n a_n (xi_n - sigma)``.

    ``config`` may be a :class:`Configuration` (scalar result) or a
    :class:`SampleBatch` / bit matrix (one value per sample).  Weights live
    on ``a.window``; for plain arrays the first ``len(a)`` window sites.
    """
    a = _weights(a)
    bits = _bits_matrix(config, a)
    S = (bits.astype(float) - sigma) @ a.values
    if isinstance(config, Configuration):
        return S[0]
    return S


def l2_norm_analytic(symbol: SpectralSymbol, a) -> float:
    """Exact ``||S||_2``: square root of
    ``sigma sum |a_n|^2 - sum_{n,m} a_n conj(a_m) |fhat(n - m)|^2``.

    Raises
    ------
    NegativeQuadraticFormError
        The form is below ``-1e-10`` (numerical failure).
    """
    a = _weights(a)
    pts = a.window.points
    G = np.abs(symbol.coeffs(pts[:, None, :] - pts[None, :, :])) ** 2
    v = a.values
    q = symbol.sigma * a.norm_sq - float(np.real(v @ (G @ np.conj(v))))
    if q < -1e-10:
        raise NegativeQuadraticFormError(f"quadratic form {q:.3e} < 0")
    return math.sqrt(max(q, 0.0))


def empirical_pnorm(batch, a, sigma, p, return_se=False, min_samples=1000):
    """``(mean |S|^p)^(1/p)`` over the batch, optionally with a bootstrap SE.

    Parameters
    ----------
    batch : SampleBatch
    a : WeightVector or array_like
    sigma : float
    p : float, ``>= 1``
    return_se : bool
    min_samples : int
        Smallest accepted batch.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    S = np.abs(weighted_sum(batch, a, sigma))
    if S.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {S.size}")
    val = float(np.mean(S ** p) ** (1.0 / p))
    if not return_se:
        return val
    bs = _bootstrap_for(S.size, getattr(batch, "master_seed", 0))
    boot = bs.means((S ** p)[:, None])[:, 0] ** (1.0 / p)
    return val, float(Bootstrap.se(boot))


def subgaussian_margin(batch, a, sigma, lam):
    """``lam^2 ||a||^2 - log mean exp(lam S)`` and its bootstrap SE.

    The sub-Gaussian bound predicts a nonnegative margin.

    Raises
    ------
    OverflowGuardError
        ``|lam| * ||a||_1 > 500``.
    """
    a = _weights(a)
    if not a.is_real:
        raise ValueError("sub-Gaussian margin needs real weights")
    lam = float(lam)
    if abs(lam) * a.l1 > MAX_EXP_ARG:
        raise OverflowGuardError(f"|lambda| * ||a||_1 = {abs(lam) * a.l1:.3g} > {MAX_EXP_ARG}")
    S = weighted_sum(batch, a, sigma)
    n = S.size
    x = lam * S
    log_mgf = float(logsumexp(x) - math.log(n))
    margin = lam * lam * a.norm_sq - log_mgf
    if n < 2:
        return margin, float("nan")
    shift = x.max()
    bs = _bootstrap_for(n, getattr(batch, "master_seed", 0))
    boot = lam * lam * a.norm_sq - (np.log(bs.means(np.exp(x - shift)[:, None])[:, 0]) + shift)
    return margin, float(Bootstrap.se(boot))


def subgaussian_margins(batch, weights, sigma, lams):
    """Vectorized :func:`subgaussian_margin` over many ``(a, lam)`` pairs.

    Returns
    -------
    margins, ses : ndarray, shape ``(len(weights), len(lams))``
        ``lams`` are multiplied by ``1 / ||a||_2`` for each vector.
    """
    bs = _bootstrap_for(len(batch), batch.master_seed)
    lams = np.asarray(lams, dtype=float)
    out_m = np.empty((len(weights), lams.size))
    out_s = np.empty_like(out_m)
    for i, a in enumerate(weights):
        a = _weights(a)
        lam = lams / a.norm
        if np.any(np.abs(lam) * a.l1 > MAX_EXP_ARG):
            raise OverflowGuardError("exponential moment would overflow")
        X = np.multiply.outer(weighted_sum(batch, a, sigma), lam)
        shift = X.max(axis=0)
        E = np.exp(X - shift)
        base = lam ** 2 * a.norm_sq
        out_m[i] = base - (np.log(E.mean(axis=0)) + shift)
        boot = base - (np.log(bs.means(E)) + shift)
        out_s[i] = Bootstrap.se(boot)
    return out_m, out_s


def _gamma_root(x, p):
    return math.exp(gammaln(x) / p)


def khintchine_constant(symbol: SpectralSymbol, p) -> float:
    """``2 sqrt(2) Gamma(p/2 + 1)^(1/p) / c_f``.

    Raises
    ------
    IndicatorSymbolError
        ``c_f = 0``.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    c2 = riesz_constant_sq(symbol)
    if c2 <= 0:
        raise IndicatorSymbolError("c_f = 0: the symbol is an indicator function")
    return 2.0 * math.sqrt(2.0) * _gamma_root(p / 2.0 + 1.0, p) / math.sqrt(c2)


def khintchine_constant_abstract(symbol: SpectralSymbol, p) -> float:
    """Alternate constant ``sqrt(2) e^(3/p) Gamma(p + 1)^(1/p) / c_f``, for comparison output."""
    if p < 2:
        raise ValueError("p must be >= 2")
    c2 = riesz_constant_sq(symbol)
    if c2 <= 0:
        raise IndicatorSymbolError("c_f = 0: the symbol is an indicator function")
    return math.sqrt(2.0) * math.exp(3.0 / p) * _gamma_root(p + 1.0, p) / math.sqrt(c2)


def absolute_pnorm_bound(a, p) -> float:
    """``2 sqrt(2) Gamma(p/2 + 1)^(1/p) ||a||_2``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    a = _weights(a)
    return 2.0 * math.sqrt(2.0) * _gamma_root(p / 2.0 + 1.0, p) * a.norm


def random_weights(count, max_dim, master, stream=7, complex_=False):
    """Seeded Gaussian weight vectors with dimensions uniform in ``[1, max_dim]``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master), spawn_key=(1, stream))))
    out = []
    for _ in range(count):
        m = int(rng.integers(1, max_dim + 1))
        v = rng.standard_normal(m)
        if complex_:
            v = v + 1j * rng.standard_normal(m)
        out.append(WeightVector(v))
    return out


# ---------------------------------------------------------------------------
# Weyl sums

def _poly(P):
    return P if isinstance(P, IntPolynomial) else IntPolynomial(P)


def _frac_phase(Pn, t):
    """``P(n) t mod 1`` without forming large products in floating point."""
    t = np.asarray(t, dtype=float)
    num, den = float(t).as_integer_ratio() if t.ndim == 0 else (None, None)
    if den is not None and den <= 1 << 62 and (den & (den - 1)) == 0:
        r = (Pn.astype(np.uint64) * np.uint64(num % den)) % np.uint64(den)
        return r.astype(float) / den
    return np.mod(np.multiply.outer(Pn.astype(float), t), 1.0)


def weyl_sum(config, P, sigma, t):
    """``sum_{n<N} (xi_n - sigma) exp(2 pi i P(n) t)`` on the window ``{0..N-1}``.

    ``config`` may be a Configuration or a bit vector / bit matrix.
    """
    P = _poly(P)
    bits = config.bits if isinstance(config, Configuration) else np.asarray(config, dtype=bool)
    N = bits.shape[-1]
    Pn = P(np.arange(N))
    ph = np.exp(2j * np.pi * _frac_phase(Pn, t))
    return (bits.astype(float) - sigma) @ ph


def _weyl_grid(P, N):
    d = P.degree
    if d > 2:
        raise DegreeTooLargeError(f"polynomial degree {d} > 2")
    cap = 4096 if d == 1 else 256
    if N > cap:
        raise WindowTooLargeError(f"N = {N} exceeds {cap} for degree {d}")
    return 8 * N ** d


def weyl_max_batch(bits, P, sigma):
    """Grid maxima of ``|weyl_sum|`` for each row of a bit matrix.

    The grid has ``G = 8 N^d`` points ``t = j / G``.  Placing the centered
    weight of site ``n`` at bin ``P(n) mod G`` and taking one FFT evaluates
    the sum exactly at every grid point.

    Returns
    -------
    maxima : ndarray, argmax_t : ndarray
    """
    P = _poly(P)
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    B, N = bits.shape
    G = _weyl_grid(P, N)
    pos = np.mod(P(np.arange(N)), G)
    maxima = np.empty(B)
    arg = np.empty(B)
    injective = np.unique(pos).size == N
    step = max(1, (1 << 23) // G)
    for s0 in range(0, B, step):
        w = bits[s0:s0 + step].astype(float) - sigma
        x = np.zeros((w.shape[0], G))
        if injective:
            x[:, pos] = w
        else:
            np.add.at(x.T, pos, w.T)
        # conj(fft(x))[j] = sum x_m e^{+2 pi i m j / G} for real x
        amp = np.abs(np.fft.rfft(x, axis=1))
        k = np.argmax(amp, axis=1)
        maxima[s0:s0 + step] = amp[np.arange(k.size), k]
        arg[s0:s0 + step] = k / G
    return maxima, arg


def weyl_max(config, P, sigma):
    """``max_t |weyl_sum(config, P, sigma, t)|`` over the ``8 N^d`` grid.

    For real weights the modulus is symmetric under ``t -> 1 - t`` so only
    ``t in [0, 1/2]`` is scanned; the grid maximum is at least
    ``(1 - pi/8)`` times the true maximum.

    Returns
    -------
    (float, float)
        Maximum modulus and its grid frequency.

    Raises
    ------
    DegreeTooLargeError, WindowTooLargeError
    """
    bits = config.bits if isinstance(config, Configuration) else np.asarray(config, dtype=bool)
    m, t = weyl_max_batch(bits[None, :], P, sigma)
    return float(m[0]), float(t[0])


def salem_littlewood_bound(N, degree=1) -> float:
    """``100 sqrt(d N log N)``."""
    return 100.0 * math.sqrt(degree * N * math.log(N))


def _prefix_sampler(symbol, N_max, samples, seed, workers=1):
    """One exact sample per index on ``{0..N_max-1}``; prefixes serve smaller N."""
    kw = build_kernel(symbol, N_max, decompose=False)
    if kw.is_diagonal or N_max <= 256:
        return sample_batch(kw, seed, samples, method="spectral", workers=workers)
    return sample_batch(kw, seed, samples, method="sequential", nested=False, workers=workers)


def salem_littlewood_suite(symbol, P, N_list, samples, seed, workers=1, bits=None) -> ExperimentReport:
    """Frequency of large Weyl maxima and their growth across ``N``.

    For every ``N`` (values below 8 are skipped) the report holds the
    frequency of ``weyl_max >= 100 sqrt(d N log N)``, checked against
    ``1 / N^2``, and a check that the median maximum grows at most twice as
    fast as ``sqrt(N log N)`` between the smallest and largest ``N``.

    Samples on the largest window are drawn once and restricted to
    prefixes, which is exact for each ``N``.
    """
    P = _poly(P)
    Ns = sorted(int(n) for n in N_list if int(n) >= 8)
    rep = ExperimentReport("salem-littlewood", sweep=True)
    if not Ns:
        rep.add_series("weyl", ["N", "median_max", "bound"], [])
        return rep
    for n in Ns:
        _weyl_grid(P, n)
    P.check_nonnegative(Ns[-1])
    if bits is None:
        bits = _prefix_sampler(symbol, Ns[-1], samples, seed, workers).bits
    sigma = symbol.sigma
    rows = []
    med = {}
    for n in Ns:
        m, _ = weyl_max_batch(bits[:, :n], P, sigma)
        bound = salem_littlewood_bound(n, P.degree)
        freq = float(np.mean(m >= bound))
        med[n] = float(np.median(m))
        rows.append([n, med[n], bound])
        rep.add(Check(f"violation_freq_d{P.degree}", freq, 1.0 / n ** 2, 0.0, "upper", N=n,
                      note=f"max over samples {m.max():.4g}"))
    lo, hi = Ns[0], Ns[-1]
    if hi > lo:
        growth = math.sqrt(hi * math.log(hi) / (lo * math.log(lo)))
        rep.add(Check(f"median_ratio_d{P.degree}", med[hi] / med[lo], 2.0 * growth, 0.0, "upper", N=hi))
    rep.add_series("weyl", ["N", "median_max", "bound"], rows)
    rep.provenance = {"seed": int(seed), "symbol_sha256": symbol_hash(symbol)}
    return rep


def weyl_decay_slopes(bits, t_list, N_list):
    """Log-log slopes of ``|(1/N) sum_{n<N} xi_n e^{2 pi i n t}|`` against ``N``.

    Returns
    -------
    ndarray, shape ``(samples, len(t_list))``
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    Ns = np.asarray(sorted(int(n) for n in N_list))
    x = np.log(Ns)
    out = np.empty((bits.shape[0], len(t_list)))
    n = np.arange(Ns[-1])
    for j, t in enumerate(t_list):
        ph = np.exp(2j * np.pi * _frac_phase(n, float(t)))
        cs = np.cumsum(bits[:, :Ns[-1]] * ph[None, :], axis=1)
        y = np.log(np.abs(cs[:, Ns - 1]) / Ns)
        out[:, j] = np.polyfit(x, y.T, 1)[0]
    return out
