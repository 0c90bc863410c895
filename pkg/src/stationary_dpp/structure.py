"""Arithmetic and ergodic structure of sampled configurations.

Sum-set coverage, longest gaps, residue-class histograms and weighted
ergodic averages along polynomial times of a circle rotation.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import EmptyConfigurationError, MExceedsWError
from .inequalities import IntPolynomial, _prefix_sampler
from .kernel import Box, gap_probability
from .report import Check, ExperimentReport
from .sampler import Configuration
from .symbol import SpectralSymbol, symbol_hash

__all__ = [
    "RotationSystem",
    "sumset_coverage",
    "max_gap",
    "max_gap_prefixes",
    "gap_presence_curve",
    "run_free_probability",
    "residue_histogram",
    "ergodic_average_pair",
    "ergodic_deviation_curve",
    "INV_GOLDEN",
]

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CF_TERMS = 12
_CF_MAX_QUOTIENT = 10 ** 6


def _continued_fraction(x: Fraction, terms):
    out = []
    for _ in range(terms):
        a = x.numerator // x.denominator
        out.append(a)
        x -= a
        if x == 0:
            break
        x = 1 / x
    return out


class RotationSystem:
    """Circle rotation ``x -> x + alpha mod 1`` with an observable.

    Parameters
    ----------
    alpha : float
        Rotation angle in ``(0, 1)``; the inverse golden ratio by default.
        Rejected when its continued fraction terminates or has a huge
        partial quotient within the first terms (a rational in disguise).
    x0 : float
        Initial point.
    observable : {"character", "interval"}
        ``exp(2 pi i x)`` or the indicator of ``[0, beta)``.
    beta : float
        Interval length for the indicator observable.
    """

    def __init__(self, alpha=INV_GOLDEN, x0=0.0, observable="character", beta=0.5):
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        cf = _continued_fraction(Fraction(alpha), _CF_TERMS)
        if len(cf) < _CF_TERMS or max(cf[1:]) > _CF_MAX_QUOTIENT:
            raise ValueError(f"alpha = {alpha!r} is numerically rational (continued fraction {cf})")
        if observable not in ("character", "interval"):
            raise ValueError("observable must be 'character' or 'interval'")
        self.alpha = alpha
        self.x0 = float(x0) % 1.0
        self.observable = observable
        self.beta = float(beta)

    def phases(self, times):
        """``x0 + t alpha mod 1`` for integer times ``t``.

        ``alpha`` is a dyadic rational ``a / 2^k``; ``t a mod 2^k`` is
        computed exactly in wrapping 64-bit integer arithmetic, so there is
        no drift however large the times.
        """
        times = np.asarray(times, dtype=np.int64)
        num, den = self.alpha.as_integer_ratio()
        if den <= 1 << 63:
            r = (times.astype(np.uint64) * np.uint64(num)) % np.uint64(den)
            frac = r.astype(float) / den
        else:
            frac = np.array([(int(t) * num % den) / den for t in times.ravel()]).reshape(times.shape)
        return np.mod(frac + self.x0, 1.0)

    def g(self, x):
        if self.observable == "character":
            return np.exp(2j * np.pi * x)
        return (np.asarray(x) < self.beta).astype(float)

    def orbit(self, times):
        """Observable along the orbit, ``g(T^t x0)``."""
        return self.g(self.phases(times))


def _bits(config):
    if isinstance(config, Configuration):
        return config.bits, config.window
    return np.asarray(config, dtype=bool), None


def sumset_coverage(config, M) -> float:
    """Fraction of ``m`` in ``[-M, M]^d`` with ``m = x + y``, ``x, y`` points.

    ``config`` must live on a symmetric box ``[-W, W]^d``.

    Raises
    ------
    MExceedsWError
    """
    bits, w = _bits(config)
    if w is None:
        n = bits.size
        if n % 2 != 1:
            raise ValueError("bit vector of a symmetric window has odd length")
        sides = np.array([n])
        W = n // 2
    else:
        if not isinstance(w, Box) or np.any(w.origin != -(w.sides // 2)) or np.any(w.sides % 2 != 1) \
                or len(set(w.sides.tolist())) != 1:
            raise ValueError("sum-set coverage needs a symmetric box [-W, W]^d")
        sides = w.sides
        W = int(sides[0] // 2)
    M = int(M)
    if M > W:
        raise MExceedsWError(f"M = {M} exceeds W = {W}")
    x = bits.reshape(tuple(sides)).astype(float)
    shape = [int(2 ** math.ceil(math.log2(2 * s - 1))) for s in sides]
    axes = list(range(len(shape)))
    F = np.fft.rfftn(x, shape, axes=axes)
    conv = np.fft.irfftn(F * F, shape, axes=axes)
    # sums range over [-2W, 2W]; index 2W is the origin
    sl = tuple(slice(2 * W - M, 2 * W + M + 1) for _ in sides)
    hit = conv[sl] > 0.5
    return float(np.mean(hit))


def max_gap(config) -> int:
    """Longest run of empty sites in a one-dimensional configuration."""
    bits, _ = _bits(config)
    return int(max_gap_prefixes(bits[None, :], [bits.size])[0, 0])


def max_gap_prefixes(bits, N_list):
    """Longest zero run in ``bits[:, :N]`` for each row and each ``N``.

    Returns
    -------
    ndarray of int, shape ``(rows, len(N_list))``
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    out = np.empty((bits.shape[0], len(N_list)), dtype=np.int64)
    for r in range(bits.shape[0]):
        pos = np.flatnonzero(bits[r])
        for j, N in enumerate(N_list):
            p = pos[pos < N]
            if p.size == 0:
                out[r, j] = N
                continue
            gaps = np.diff(p) - 1
            inner = gaps.max() if gaps.size else 0
            out[r, j] = max(int(inner), int(p[0]), int(N - 1 - p[-1]))
    return out


def run_free_probability(N, ell, q):
    """``P(no run of ell consecutive empty sites in N i.i.d. sites)``.

    Each site is empty with probability ``q``.  Dynamic programming over
    the length of the current trailing empty run.
    """
    if ell <= 0:
        return 0.0
    if ell > N:
        return 1.0
    state = np.zeros(ell)
    state[0] = 1.0
    for _ in range(N):
        new = np.zeros(ell)
        new[0] = state.sum() * (1 - q)
        new[1:] = state[:-1] * q
        state = new
    return float(state.sum())


def gap_presence_curve(symbol: SpectralSymbol, ell_list, N_list, samples, seed, workers=1,
                       bits=None) -> ExperimentReport:
    """Empirical probability of a length-``ell`` gap inside ``[0, N)``.

    For constant symbols the exact presence probability from the run-length
    recursion is the reference (checked within 5 binomial SE).  For other
    symbols the expected number of gap starts ``(N - ell + 1) * gap(ell)``
    bounds the presence probability from above, and that union bound is
    checked.
    """
    Ns = sorted(int(n) for n in N_list)
    ells = sorted(int(l) for l in ell_list)
    if bits is None:
        bits = _prefix_sampler(symbol, Ns[-1], samples, seed, workers).bits
    gaps = max_gap_prefixes(bits, Ns)
    rep = ExperimentReport("gaps", sweep=True)
    rows = []
    for l in ells:
        g = gap_probability(symbol, l) if l <= 4096 else 0.0
        for j, N in enumerate(Ns):
            emp = float(np.mean(gaps[:, j] >= l))
            se = math.sqrt(max(emp * (1 - emp), 1.0 / samples) / samples)
            expected = max(N - l + 1, 0) * g
            if symbol.is_constant:
                exact = 1.0 - run_free_probability(N, l, 1.0 - symbol.sigma)
                rep.add(Check("gap_presence", emp, exact, 5 * se, "equal", N=N, note=f"ell={l}"))
                ref = exact
            else:
                rep.add(Check("gap_presence_union_bound", emp, min(1.0, expected), 5 * se, "upper", N=N,
                              note=f"ell={l}"))
                ref = min(1.0, expected)
            rows.append([l, N, emp, ref, expected])
    med = np.median(gaps, axis=0)
    rep.add_series("presence", ["ell", "N", "presence", "reference", "expected_starts"], rows)
    rep.add_series("max_gap", ["N", "median_gap"], [[N, float(m)] for N, m in zip(Ns, med)])
    rep.provenance = {"seed": int(seed), "symbol_sha256": symbol_hash(symbol)}
    return rep


def residue_histogram(config, q, P=None):
    """Distribution of points (or of ``P(n)`` over points) modulo ``q``.

    Returns
    -------
    ndarray, shape ``(q,)``
        Fractions summing to one.

    Raises
    ------
    EmptyConfigurationError
    """
    q = int(q)
    if q < 2:
        raise ValueError("q must be at least 2")
    bits, w = _bits(config)
    if w is not None:
        n = w.points[bits, 0]
    else:
        n = np.flatnonzero(bits)
    if n.size == 0:
        raise EmptyConfigurationError("no points to histogram")
    vals = n if P is None else (P if isinstance(P, IntPolynomial) else IntPolynomial(P))(n)
    h = np.bincount(np.mod(vals, q), minlength=q)
    return h / n.size


def ergodic_average_pair(config, system: RotationSystem, P, sigma):
    """Weighted and reference ergodic averages along ``P(n)``.

    Returns
    -------
    weighted : complex or float
        ``(1/N) sum xi_n g(T^{P(n)} x0)``
    reference : complex or float
        ``sigma (1/N) sum g(T^{P(n)} x0)``
    deviation : float
        ``|weighted - reference|``
    """
    bits, _ = _bits(config)
    P = P if isinstance(P, IntPolynomial) else IntPolynomial(P)
    N = bits.size
    g = system.orbit(P(np.arange(N)))
    weighted = np.sum(g[bits]) / N
    reference = sigma * np.sum(g) / N
    return weighted, reference, float(abs(weighted - reference))


def ergodic_deviation_curve(bits, system: RotationSystem, P, sigma, N_list):
    """Deviation ``|weighted - reference|`` for each row and each prefix ``N``."""
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    P = P if isinstance(P, IntPolynomial) else IntPolynomial(P)
    Ns = np.asarray(sorted(int(n) for n in N_list))
    g = system.orbit(P(np.arange(Ns[-1])))
    out = np.empty((bits.shape[0], Ns.size))
    for r in range(bits.shape[0]):
        cs = np.cumsum((bits[r, :Ns[-1]] - sigma) * g)
        out[r] = np.abs(cs[Ns - 1]) / Ns
    return out
