"""Spectral symbols on the torus and their Fourier data.

A symbol is a function ``f: T^d -> [0, 1]`` given as a tensor product of
one-dimensional factors.  Each factor type has closed-form Fourier
coefficients, so everything downstream (kernels, covariances, norms) is
computed without quadrature.

Conventions
-----------
The torus is ``[0, 1)`` and ``fhat(k) = int_0^1 f(t) exp(-2 pi i k t) dt``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidSymbolError

__all__ = [
    "Constant",
    "PiecewiseConstant",
    "TrigPolynomial",
    "SpectralSymbol",
    "FourierTable",
    "indicator",
    "fourier_coeff",
    "mean_density",
    "riesz_constant_sq",
    "covariance",
    "field_spectral_density",
    "parseval_tail",
    "symbol_from_dict",
    "symbol_to_dict",
    "symbol_hash",
]

TRIG_GRID = 2 ** 16
TRIG_SLACK = 1e-12


def _exact_phase(k, num, den):
    """``exp(-2 pi i k num/den)`` with exact integer angle reduction.

    The residue ``k*num mod den`` is folded into ``(-den/2, den/2]`` so that
    opposite frequencies give bitwise conjugate values, and quarter turns are
    returned exactly.
    """
    k = np.asarray(k, dtype=np.int64)
    r = np.mod(k * num, den)
    r = np.where(2 * r > den, r - den, r)
    out = np.exp(-2j * np.pi * (r / den))
    # exact unit roots at multiples of a quarter turn
    q4 = 4 * r
    exact = np.mod(q4, den) == 0
    if np.any(exact):
        quarter = np.mod(q4[exact] // den, 4)
        table = np.array([1.0, -1j, -1.0, 1j])
        out[exact] = table[quarter]
    return out


class Constant:
    """Constant factor ``f = p`` with ``0 < p < 1``."""

    kind = "constant"

    def __init__(self, value):
        value = float(value)
        if not 0.0 < value < 1.0:
            raise InvalidSymbolError(f"constant value must lie in (0, 1), got {value}")
        self.value = value

    def coeffs(self, k):
        k = np.asarray(k, dtype=np.int64)
        return np.where(k == 0, self.value, 0.0).astype(complex)

    @property
    def mean(self):
        return self.value

    @property
    def mean_sq(self):
        return self.value * self.value

    @property
    def is_real(self):
        return True

    def evaluate(self, t):
        return np.full(np.shape(t), self.value)

    def max_lag(self):
        return 0

    def to_dict(self):
        return {"kind": "constant", "value": self.value}

    def __repr__(self):
        return f"Constant({self.value!r})"


class PiecewiseConstant:
    """Step function on ``[0, 1)`` with rational breakpoints.

    Parameters
    ----------
    breakpoints : sequence of Fraction-like
        ``0 = b_0 < b_1 < ... < b_m = 1``.  Strings such as ``"1/4"`` are
        accepted.
    heights : sequence of float
        ``h_1, ..., h_m`` in ``[0, 1]``; ``h_i`` is the value on
        ``[b_{i-1}, b_i)``.
    """

    kind = "piecewise"

    def __init__(self, breakpoints, heights):
        b = [Fraction(x) for x in breakpoints]
        h = np.asarray(heights, dtype=float)
        if len(b) < 2 or b[0] != 0 or b[-1] != 1:
            raise InvalidSymbolError("breakpoints must start at 0 and end at 1")
        if any(b1 <= b0 for b0, b1 in zip(b[:-1], b[1:])):
            raise InvalidSymbolError("breakpoints must be strictly increasing")
        if h.shape != (len(b) - 1,):
            raise InvalidSymbolError("need exactly one height per interval")
        if np.any(h < 0) or np.any(h > 1) or not np.all(np.isfinite(h)):
            raise InvalidSymbolError("heights must lie in [0, 1]")
        self.breakpoints = tuple(b)
        self.heights = h
        widths = np.array([float(b1 - b0) for b0, b1 in zip(b[:-1], b[1:])])
        self._mean = float(np.sum(h * widths))
        self._mean_sq = float(np.sum(h * h * widths))

    def coeffs(self, k):
        k = np.asarray(k, dtype=np.int64)
        shape = k.shape
        k = k.ravel()
        out = np.empty(k.shape, dtype=complex)
        zero = k == 0
        out[zero] = self._mean
        kk = np.abs(k[~zero])
        if kk.size:
            # Num = sum_i h_i (E_{i-1} - E_i), fhat = -i Num / (2 pi k)
            phases = [_exact_phase(kk, x.numerator, x.denominator) for x in self.breakpoints]
            num = np.zeros(kk.shape, dtype=complex)
            for i, hi in enumerate(self.heights):
                if hi != 0.0:
                    num += hi * (phases[i] - phases[i + 1])
            val = -1j * num / (2.0 * np.pi * kk)
            neg = k[~zero] < 0
            val[neg] = np.conj(val[neg])
            out[~zero] = val
        return out.reshape(shape)

    @property
    def mean(self):
        return self._mean

    @property
    def mean_sq(self):
        return self._mean_sq

    @property
    def is_real(self):
        # f(t) = f(-t) almost everywhere
        b = self.breakpoints
        mirrored = sorted({(1 - x) % 1 for x in b[1:-1]})
        if mirrored != sorted(b[1:-1]):
            return False
        mid = [(b0 + b1) / 2 for b0, b1 in zip(b[:-1], b[1:])]
        return bool(np.allclose(self.evaluate(np.array([float(m) for m in mid])),
                                self.evaluate(np.array([float((1 - m) % 1) for m in mid])),
                                rtol=0, atol=0))

    def evaluate(self, t):
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        edges = np.array([float(x) for x in self.breakpoints[1:-1]])
        return self.heights[np.searchsorted(edges, t, side="right")]

    def max_lag(self):
        return None

    def to_dict(self):
        return {
            "kind": "piecewise",
            "breakpoints": [f"{x.numerator}/{x.denominator}" for x in self.breakpoints],
            "heights": [float(x) for x in self.heights],
        }

    def __repr__(self):
        bp = ", ".join(str(x) for x in self.breakpoints)
        return f"PiecewiseConstant([{bp}], {self.heights.tolist()})"


class TrigPolynomial:
    """Real trigonometric polynomial ``f(t) = sum_{|k|<=K} c_k e^{2 pi i k t}``.

    Parameters
    ----------
    coefficients : sequence of complex
        ``c_0, c_1, ..., c_K``; negative frequencies follow from
        ``c_{-k} = conj(c_k)``.  ``c_0`` must be real.
    """

    kind = "trig"

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=complex).ravel()
        if c.size == 0:
            raise InvalidSymbolError("need at least c_0")
        if c[0].imag != 0:
            raise InvalidSymbolError("c_0 must be real")
        if not np.all(np.isfinite(c)):
            raise InvalidSymbolError("coefficients must be finite")
        self.c = c
        self.K = c.size - 1
        if 2 * self.K + 1 > TRIG_GRID:
            raise InvalidSymbolError("degree too large for grid validation")
        vals = self.evaluate(np.arange(TRIG_GRID) / TRIG_GRID)
        if vals.min() < -TRIG_SLACK or vals.max() > 1 + TRIG_SLACK:
            raise InvalidSymbolError(
                f"trig polynomial leaves [0, 1] on the grid (range {vals.min():.3g}..{vals.max():.3g})")

    def coeffs(self, k):
        k = np.asarray(k, dtype=np.int64)
        kk = np.abs(k)
        inside = kk <= self.K
        out = np.zeros(k.shape, dtype=complex)
        out[inside] = self.c[kk[inside]]
        neg = inside & (k < 0)
        out[neg] = np.conj(out[neg])
        return out

    @property
    def mean(self):
        return float(self.c[0].real)

    @property
    def mean_sq(self):
        # Parseval
        return float(self.c[0].real ** 2 + 2.0 * np.sum(np.abs(self.c[1:]) ** 2))

    @property
    def is_real(self):
        return bool(np.all(self.c.imag == 0))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.K + 1)
        ph = np.exp(2j * np.pi * np.multiply.outer(t, k))
        return self.c[0].real + 2.0 * np.real(ph @ self.c[1:]) if self.K else np.full(t.shape, self.c[0].real)

    def max_lag(self):
        return self.K

    def to_dict(self):
        return {"kind": "trig", "coefficients": [[float(z.real), float(z.imag)] for z in self.c]}

    def __repr__(self):
        return f"TrigPolynomial({self.c.tolist()})"


def indicator(a, b):
    """Indicator of the arc ``[a, b]`` (``a < b``, ``b - a < 1``) as a step function.

    >>> indicator("-1/4", "1/4").mean
    0.5
    """
    a, b = Fraction(a), Fraction(b)
    if not 0 < b - a < 1:
        raise InvalidSymbolError("arc length must lie in (0, 1)")
    a0, b0 = a % 1, b % 1
    if a0 < b0:
        bps = [Fraction(0), a0, b0, Fraction(1)]
        hs = [0.0, 1.0, 0.0]
    else:
        bps = [Fraction(0), b0, a0, Fraction(1)]
        hs = [1.0, 0.0, 1.0]
    # drop empty intervals at the ends
    keep_b, keep_h = [bps[0]], []
    for x, h in zip(bps[1:], hs):
        if x == keep_b[-1]:
            continue
        keep_b.append(x)
        keep_h.append(h)
    return PiecewiseConstant(keep_b, keep_h)


_FACTOR_TYPES = (Constant, PiecewiseConstant, TrigPolynomial)


@dataclass(frozen=True)
class SpectralSymbol:
    """Tensor product symbol ``f(t_1, ..., t_d) = prod_j f_j(t_j)``.

    Parameters
    ----------
    factors : sequence
        One-dimensional factors (:class:`Constant`,
        :class:`PiecewiseConstant` or :class:`TrigPolynomial`).
    """

    factors: tuple
    sigma: float = field(init=False)

    def __init__(self, factors):
        if isinstance(factors, _FACTOR_TYPES):
            factors = (factors,)
        factors = tuple(factors)
        if not factors:
            raise InvalidSymbolError("need at least one factor")
        for fac in factors:
            if not isinstance(fac, _FACTOR_TYPES):
                raise InvalidSymbolError(f"unsupported factor {fac!r}")
        object.__setattr__(self, "factors", factors)
        sigma = float(np.prod([f.mean for f in factors]))
        if not 0.0 < sigma < 1.0:
            raise InvalidSymbolError(f"mean density must lie in (0, 1), got {sigma}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def dimension(self):
        return len(self.factors)

    @property
    def is_real(self):
        """True when every Fourier coefficient is real."""
        return all(f.is_real for f in self.factors)

    @property
    def mean_sq(self):
        """``int f^2 dm``."""
        return float(np.prod([f.mean_sq for f in self.factors]))

    @property
    def is_constant(self):
        return all(isinstance(f, Constant) for f in self.factors)

    def coeffs(self, lags):
        """Vectorized Fourier coefficients.

        Parameters
        ----------
        lags : array_like of int, shape (..., d)
            For ``d = 1`` a plain integer array is also accepted.

        Returns
        -------
        ndarray of complex, shape (...)
        """
        lags = np.asarray(lags, dtype=np.int64)
        d = self.dimension
        if d == 1:
            if lags.ndim >= 2 and lags.shape[-1] == 1:
                lags = lags[..., 0]
            return self.factors[0].coeffs(lags)
        if lags.shape[-1] != d:
            raise ValueError(f"lags must have trailing dimension {d}")
        out = self.factors[0].coeffs(lags[..., 0])
        for j in range(1, d):
            out = out * self.factors[j].coeffs(lags[..., j])
        return out

    def evaluate(self, t):
        """Point values ``f(t)``; ``t`` has trailing dimension ``d`` when d > 1."""
        t = np.asarray(t, dtype=float)
        if self.dimension == 1:
            return self.factors[0].evaluate(t)
        out = self.factors[0].evaluate(t[..., 0])
        for j in range(1, self.dimension):
            out = out * self.factors[j].evaluate(t[..., j])
        return out

    def to_dict(self):
        return symbol_to_dict(self)

    def __repr__(self):
        return f"SpectralSymbol({list(self.factors)!r})"


class FourierTable:
    """Cached coefficients ``fhat(k)`` for ``|k_j| <= K`` on every axis.

    Entries are produced by the same vectorized routine as
    :func:`fourier_coeff`, hence agree with it bit for bit.
    """

    def __init__(self, symbol: SpectralSymbol, K):
        d = symbol.dimension
        K = np.broadcast_to(np.asarray(K, dtype=np.int64), (d,)).copy()
        if np.any(K < 0):
            raise ValueError("max lag must be nonnegative")
        self.symbol = symbol
        self.K = K
        axes = [np.arange(-k, k + 1) for k in K]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = symbol.coeffs(grid if d > 1 else grid[..., 0])
        vals.setflags(write=False)
        self.values = vals

    def __getitem__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        if np.any(np.abs(k) > self.K):
            raise IndexError("lag outside table")
        return self.values[tuple(k + self.K)]

    def lookup(self, lags):
        """Vectorized read; ``lags`` has trailing dimension ``d``."""
        lags = np.asarray(lags, dtype=np.int64)
        if self.symbol.dimension == 1 and not (lags.ndim >= 2 and lags.shape[-1] == 1):
            lags = lags[..., None]
        if np.any(np.abs(lags) > self.K):
            raise IndexError("lag outside table")
        idx = lags + self.K
        return self.values[tuple(np.moveaxis(idx, -1, 0))]


def _as_lag(symbol, k):
    k = np.atleast_1d(np.asarray(k, dtype=np.int64))
    if k.shape != (symbol.dimension,):
        raise ValueError(f"lag must be an integer {symbol.dimension}-vector")
    return k


def fourier_coeff(symbol: SpectralSymbol, k) -> complex:
    """``fhat(k) = prod_j fhat_j(k_j)``.

    Examples
    --------
    >>> s = SpectralSymbol(indicator("-1/4", "1/4"))
    >>> round(fourier_coeff(s, 1).real, 7)
    0.3183099
    """
    k = _as_lag(symbol, k)
    return complex(symbol.coeffs(k[None, :] if symbol.dimension > 1 else k)[0])


def mean_density(symbol: SpectralSymbol) -> float:
    """``sigma = int f dm``."""
    return symbol.sigma


def riesz_constant_sq(symbol: SpectralSymbol) -> float:
    """``c_f^2 = int f dm - int f^2 dm``, from closed forms."""
    val = symbol.sigma - symbol.mean_sq
    # indicators give cancellation noise of a few ulps
    return 0.0 if abs(val) < 1e-15 else val


def covariance(symbol: SpectralSymbol, lag) -> float:
    """Covariance ``E[xi_n xi_0] - sigma^2`` of the occupation field."""
    lag = _as_lag(symbol, lag)
    if not np.any(lag):
        return symbol.sigma - symbol.sigma ** 2
    return -abs(fourier_coeff(symbol, lag)) ** 2


def _sq_coeffs_1d(symbol, K):
    n = np.arange(0, K + 1)
    return np.abs(symbol.coeffs(n)) ** 2


def field_spectral_density(symbol: SpectralSymbol, t, K) -> float | np.ndarray:
    """Truncated spectral density of the centered field at ``t``.

    ``sigma - sum_{|n|<=K} |fhat(n)|^2 exp(2 pi i n t)``; one-dimensional
    symbols only.  ``t`` may be an array.
    """
    if symbol.dimension != 1:
        raise ValueError("field spectral density is only defined here for d = 1")
    K = int(K)
    if K < 0:
        raise ValueError("truncation must be nonnegative")
    a = _sq_coeffs_1d(symbol, K)
    t = np.asarray(t, dtype=float)
    n = np.arange(1, K + 1)
    tail = np.cos(2 * np.pi * np.multiply.outer(t, n)) @ a[1:] if K else np.zeros(t.shape)
    out = symbol.sigma - a[0] - 2.0 * tail
    return float(out) if out.ndim == 0 else out


def parseval_tail(symbol: SpectralSymbol, K) -> float:
    """``int f^2 - sum_{|n|<=K} |fhat(n)|^2``, the spectral density truncation error."""
    if symbol.dimension != 1:
        raise ValueError("d = 1 only")
    a = _sq_coeffs_1d(symbol, int(K))
    return max(symbol.mean_sq - a[0] - 2.0 * np.sum(a[1:]), 0.0)


# ---------------------------------------------------------------------------
# serialization

def _factor_from_dict(d):
    kind = d.get("kind")
    if kind == "constant":
        return Constant(d["value"])
    if kind == "piecewise":
        return PiecewiseConstant([Fraction(str(x)) for x in d["breakpoints"]], d["heights"])
    if kind == "indicator":
        a, b = d["interval"]
        return indicator(str(a), str(b))
    if kind == "trig":
        c = [complex(*z) if isinstance(z, (list, tuple)) else complex(z) for z in d["coefficients"]]
        return TrigPolynomial(c)
    raise InvalidSymbolError(f"unknown factor kind {kind!r}")


def symbol_from_dict(d) -> SpectralSymbol:
    """Build a symbol from its document form.

    Accepted shapes::

        {"kind": "tensor", "dimension": 2, "factors": [<factor>, <factor>]}
        <factor>                                  # shorthand for d = 1

    with factors ``{"kind": "constant", "value": 0.3}``,
    ``{"kind": "piecewise", "breakpoints": ["0", "1/4", ...], "heights": [...]}``,
    ``{"kind": "indicator", "interval": ["-1/4", "1/4"]}`` or
    ``{"kind": "trig", "coefficients": [[re, im], ...]}`` (``c_0 ... c_K``).
    """
    if not isinstance(d, dict):
        raise InvalidSymbolError("symbol description must be a mapping")
    try:
        if d.get("kind") == "tensor":
            factors = [_factor_from_dict(f) for f in d["factors"]]
            dim = d.get("dimension", len(factors))
            if dim != len(factors):
                raise InvalidSymbolError("dimension does not match the number of factors")
            return SpectralSymbol(factors)
        return SpectralSymbol(_factor_from_dict(d))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, InvalidSymbolError):
            raise
        raise InvalidSymbolError(f"malformed symbol description: {exc}") from exc


def symbol_to_dict(symbol: SpectralSymbol) -> dict:
    return {
        "kind": "tensor",
        "dimension": symbol.dimension,
        "factors": [f.to_dict() for f in symbol.factors],
    }


def symbol_hash(symbol: SpectralSymbol) -> str:
    """SHA-256 of the canonical JSON form."""
    blob = json.dumps(symbol_to_dict(symbol), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# the three reference symbols used throughout the tests

def bernoulli_symbol(p=0.3, d=1) -> SpectralSymbol:
    """Constant symbol: i.i.d. Bernoulli(p) sites."""
    return SpectralSymbol([Constant(p)] * d)


def sine_symbol() -> SpectralSymbol:
    """``1_[-1/4, 1/4]``: the discrete sine process with density 1/2."""
    return SpectralSymbol(indicator("-1/4", "1/4"))


def trig_symbol() -> SpectralSymbol:
    """``1/2 + cos(2 pi t)/4``."""
    return SpectralSymbol(TrigPolynomial([0.5, 0.125]))
