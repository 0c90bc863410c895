"""Restricted kernels ``K_f`` on finite windows and determinant oracles.

The kernel of the stationary process is ``K(n, m) = fhat(n - m)``.  On a
finite window this is a Hermitian (block-)Toeplitz matrix whose spectrum
lies in ``[0, 1]``; every exact probability in the package is a
determinant built from it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DuplicatePointsError,
    NotASubsetError,
    SpectrumOutOfRangeError,
    WindowTooLargeError,
    WindowTooLargeForExactDistributionError,
)
from .symbol import SpectralSymbol

__all__ = [
    "Window",
    "Box",
    "Explicit",
    "interval",
    "as_window",
    "KernelWindow",
    "build_kernel",
    "correlation",
    "gap_probability",
    "log_gap_probability",
    "gap_probability_mp",
    "cylinder_probability",
    "cylinder_probability_signed",
    "exact_distribution",
    "SubsetDistribution",
]

DEFAULT_CAP = 4096
EIG_TOL = 1e-9
EXACT_MAX = 14
CORRELATION_MAX = 20


class Window:
    """Finite set of lattice sites in fixed lexicographic order."""

    points: np.ndarray

    @property
    def size(self):
        return self.points.shape[0]

    def __len__(self):
        return self.size

    @property
    def dimension(self):
        return self.points.shape[1]

    def index_of(self, pts):
        """Positions of the given sites in the enumeration order."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        if self.dimension == 1 and pts.shape[0] == 1 and pts.shape[1] != 1:
            pts = pts.T
        lookup = {tuple(p): i for i, p in enumerate(self.points.tolist())}
        try:
            return np.array([lookup[tuple(p)] for p in pts.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise NotASubsetError(f"site {exc.args[0]} is not in the window") from None

    def __eq__(self, other):
        return isinstance(other, Window) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())


class Box(Window):
    """Axis-aligned box ``origin + [0, sides)`` in lexicographic order.

    Parameters
    ----------
    origin : int or sequence of int
    sides : int or sequence of int
        Positive side lengths, one per axis.
    """

    def __init__(self, origin, sides):
        origin = np.atleast_1d(np.asarray(origin, dtype=np.int64))
        sides = np.atleast_1d(np.asarray(sides, dtype=np.int64))
        if origin.shape != sides.shape or origin.ndim != 1:
            raise ValueError("origin and sides must have the same length")
        if np.any(sides < 1):
            raise ValueError("box sides must be positive")
        self.origin = origin
        self.sides = sides
        self._points = None

    @property
    def points(self):
        if self._points is None:
            axes = [o + np.arange(s) for o, s in zip(self.origin, self.sides)]
            grid = np.meshgrid(*axes, indexing="ij")
            self._points = np.stack([g.ravel() for g in grid], axis=1)
        return self._points

    @property
    def size(self):
        return int(np.prod(self.sides))

    @property
    def dimension(self):
        return self.origin.size

    def __repr__(self):
        return f"Box(origin={self.origin.tolist()}, sides={self.sides.tolist()})"


class Explicit(Window):
    """Explicit list of distinct sites, stored sorted lexicographically."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("window must be a nonempty list of sites")
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        if pts.shape[0] > 1 and np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise DuplicatePointsError("window contains duplicate sites")
        self.points = pts

    def __repr__(self):
        return f"Explicit({self.points.tolist()})"


def interval(N, start=0) -> Box:
    """The one-dimensional box ``{start, ..., start + N - 1}``."""
    return Box([start], [N])


def as_window(obj) -> Window:
    """Coerce an int (length), a Window or a list of sites to a Window."""
    if isinstance(obj, Window):
        return obj
    if isinstance(obj, (int, np.integer)):
        return interval(int(obj))
    return Explicit(obj)


def _toeplitz_1d(factor_coeffs, n):
    c = factor_coeffs(np.arange(n))
    r = np.conj(c)
    r[0] = c[0]
    return sla.toeplitz(c, r)


def _kernel_matrix(symbol: SpectralSymbol, window: Window):
    if isinstance(window, Box):
        # tensor symbol on a product box: Kronecker product of Toeplitz blocks
        mats = [_toeplitz_1d(f.coeffs, int(s)) for f, s in zip(symbol.factors, window.sides)]
        M = mats[0]
        for T in mats[1:]:
            M = np.kron(M, T)
        return M
    pts = window.points
    lags = pts[:, None, :] - pts[None, :, :]
    return symbol.coeffs(lags)


@dataclass(frozen=True, eq=False)
class KernelWindow:
    """Kernel ``K_f`` restricted to a window, with its spectrum.

    Attributes
    ----------
    symbol : SpectralSymbol
    window : Window
    diag : ndarray or None
        Diagonal entries when the kernel is diagonal (constant symbols);
        such kernels never materialize a dense matrix.
    raw_eigenvalues : ndarray
        Eigenvalues before clamping, descending.
    """

    symbol: SpectralSymbol
    window: Window
    cap: int
    _matrix: np.ndarray | None
    diag: np.ndarray | None
    _eig: list

    @property
    def size(self):
        return self.window.size

    @property
    def is_diagonal(self):
        return self.diag is not None

    @property
    def matrix(self) -> np.ndarray:
        """Dense kernel matrix (read only)."""
        if self._matrix is None:
            if self.size > self.cap:
                raise WindowTooLargeError(
                    f"dense matrix of a {self.size}-site window exceeds the cap {self.cap}")
            M = np.diag(self.diag)
            M.setflags(write=False)
            object.__setattr__(self, "_matrix", M)
        return self._matrix

    @property
    def is_real(self):
        return self.is_diagonal or not np.iscomplexobj(self._matrix)

    def _decompose(self):
        if self._eig:
            return
        if self.is_diagonal:
            order = np.argsort(-self.diag, kind="stable")
            raw = self.diag[order]
            vecs = None
            perm = order
        else:
            w, V = sla.eigh(self._matrix, check_finite=False)
            raw, vecs, perm = w[::-1].copy(), np.ascontiguousarray(V[:, ::-1]), None
        lo, hi = raw.min(), raw.max()
        if lo < -EIG_TOL or hi > 1 + EIG_TOL:
            raise SpectrumOutOfRangeError(
                f"kernel eigenvalues in [{lo:.3e}, {hi:.3e}] leave [-{EIG_TOL}, 1+{EIG_TOL}]")
        lam = np.clip(raw, 0.0, 1.0)
        for a in (raw, lam):
            a.setflags(write=False)
        if vecs is not None:
            vecs.setflags(write=False)
        self._eig.extend([raw, lam, vecs, perm])

    @property
    def raw_eigenvalues(self) -> np.ndarray:
        self._decompose()
        return self._eig[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues clamped to ``[0, 1]``, descending."""
        self._decompose()
        return self._eig[1]

    @property
    def eigenvectors(self) -> np.ndarray:
        """Orthonormal eigenvectors as columns, matching :attr:`eigenvalues`."""
        self._decompose()
        if self._eig[2] is None:
            n = self.size
            if n > self.cap:
                raise WindowTooLargeError("eigenvector matrix exceeds the window cap")
            V = np.zeros((n, n))
            V[self._eig[3], np.arange(n)] = 1.0
            V.setflags(write=False)
            self._eig[2] = V
        return self._eig[2]

    @property
    def is_decomposed(self):
        return bool(self._eig)

    def contraction_margin(self):
        """``1 - max eigenvalue`` computed from the raw spectrum."""
        return 1.0 - float(self.raw_eigenvalues[0])


def build_kernel(symbol: SpectralSymbol, window, cap=DEFAULT_CAP, decompose=True) -> KernelWindow:
    """Build ``K_f`` on a window.

    Parameters
    ----------
    symbol : SpectralSymbol
    window : Window, int or sequence of sites
        An int ``N`` means ``{0, ..., N-1}``.
    cap : int
        Maximal number of sites for a dense kernel.  Diagonal kernels
        (constant symbols) are stored by their diagonal and may exceed it.
    decompose : bool
        Compute the eigendecomposition now (default).  With ``False`` it is
        computed on first access, which lets samplers that only need the
        matrix skip the cubic cost.

    Raises
    ------
    WindowTooLargeError
    SpectrumOutOfRangeError
    """
    window = as_window(window)
    if window.dimension != symbol.dimension:
        raise ValueError(f"window dimension {window.dimension} != symbol dimension {symbol.dimension}")
    n = window.size
    if symbol.is_constant:
        diag = np.full(n, symbol.sigma)
        diag.setflags(write=False)
        kw = KernelWindow(symbol, window, cap, None, diag, [])
    else:
        if n > cap:
            raise WindowTooLargeError(f"window has {n} sites, cap is {cap}")
        M = _kernel_matrix(symbol, window)
        if np.all(M.imag == 0):
            M = np.ascontiguousarray(M.real)
        M.setflags(write=False)
        kw = KernelWindow(symbol, window, cap, M, None, [])
    if decompose:
        kw._decompose()
    return kw


def _points_array(symbol, points):
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim == 0:
        pts = pts[None]
    if pts.ndim == 1:
        pts = pts[:, None] if symbol.dimension == 1 else pts[None, :]
    if pts.shape[1] != symbol.dimension:
        raise ValueError("points must be integer d-vectors")
    return pts


def correlation(symbol: SpectralSymbol, points) -> float:
    """``P(all points in X) = det[fhat(n_i - n_j)]``.

    Raises
    ------
    DuplicatePointsError
    """
    pts = _points_array(symbol, points)
    k = pts.shape[0]
    if k == 0:
        return 1.0
    if k > CORRELATION_MAX:
        raise ValueError(f"at most {CORRELATION_MAX} points")
    if len({tuple(p) for p in pts.tolist()}) != k:
        raise DuplicatePointsError("points must be distinct")
    M = symbol.coeffs(pts[:, None, :] - pts[None, :, :])
    if np.all(M.imag == 0):
        M = M.real
    return float(np.real(np.linalg.det(M)))


def _kernel(symbol_or_kernel, window, cap=DEFAULT_CAP):
    if isinstance(symbol_or_kernel, KernelWindow):
        return symbol_or_kernel
    return build_kernel(symbol_or_kernel, window, cap=cap)


def gap_probability(symbol, window=None, cap=DEFAULT_CAP) -> float:
    """``P(X misses the window) = prod_i (1 - lambda_i)``.

    ``symbol`` may also be a prebuilt :class:`KernelWindow`.
    """
    kw = _kernel(symbol, window, cap)
    return float(np.prod(1.0 - kw.eigenvalues))


def log_gap_probability(symbol, window=None, cap=DEFAULT_CAP) -> float:
    """Natural log of :func:`gap_probability` (no underflow)."""
    kw = _kernel(symbol, window, cap)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log1p(-kw.eigenvalues)))


def _mp_coeff(factor, k, mp):
    from .symbol import Constant, PiecewiseConstant

    if isinstance(factor, Constant):
        return mp.mpf(factor.value) if k == 0 else mp.mpf(0)
    if isinstance(factor, PiecewiseConstant):
        if k == 0:
            return sum((mp.mpf(h) * (mp.mpf(b1.numerator) / b1.denominator - mp.mpf(b0.numerator) / b0.denominator)
                        for h, b0, b1 in zip(factor.heights, factor.breakpoints[:-1], factor.breakpoints[1:])),
                       mp.mpf(0))
        e = [mp.expjpi(-2 * mp.mpf(k * b.numerator) / b.denominator) for b in factor.breakpoints]
        num = sum((mp.mpf(h) * (e[i] - e[i + 1]) for i, h in enumerate(factor.heights)), mp.mpc(0))
        return num / (2j * mp.pi * k)
    c = factor.c
    kk = abs(k)
    if kk >= c.size:
        return mp.mpf(0)
    z = mp.mpc(c[kk].real, c[kk].imag)
    return z if k >= 0 else mp.conj(z)


def gap_probability_mp(symbol: SpectralSymbol, window, dps=60):
    """``det(I - K_W)`` in extended precision.

    Fourier coefficients are re-evaluated from their closed forms at
    ``dps`` decimal digits (symbol parameters are taken as exact binary
    numbers), so the result certifies positivity far below double
    precision underflow.

    Returns
    -------
    mpmath.mpf
    """
    import mpmath

    window = as_window(window)
    pts = window.points
    mp = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.mp
    old = mp.dps
    mp.dps = dps
    try:
        cache = {}

        def coeff(lag):
            key = tuple(lag)
            if key not in cache:
                val = mp.mpf(1)
                for fac, kj in zip(symbol.factors, key):
                    val *= _mp_coeff(fac, int(kj), mp)
                cache[key] = val
            return cache[key]

        n = pts.shape[0]
        A = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                A[i, j] = (1 if i == j else 0) - coeff(pts[i] - pts[j])
        return mp.re(mp.det(A))
    finally:
        mp.dps = old


# ---------------------------------------------------------------------------
# cylinder probabilities

class SubsetDistribution:
    """Law of ``X cap W`` over all ``2^|W|`` subsets.

    ``probs[mask]`` is the probability of the subset whose members are the
    window sites ``i`` with bit ``i`` of ``mask`` set (window order).
    """

    def __init__(self, window: Window, probs: np.ndarray):
        self.window = window
        self.probs = probs

    def __len__(self):
        return self.probs.size

    def mask_of(self, subset):
        if len(subset) == 0:
            return 0
        idx = self.window.index_of(np.asarray(list(subset)))
        return int(np.sum(1 << idx.astype(np.int64)))

    def __getitem__(self, subset):
        return float(self.probs[self.mask_of(subset)])

    def as_dict(self):
        """Map ``frozenset`` of site tuples to probability."""
        pts = [tuple(p) if len(p) > 1 else p[0] for p in self.window.points.tolist()]
        out = {}
        n = len(pts)
        for mask in range(1 << n):
            out[frozenset(pts[i] for i in range(n) if mask >> i & 1)] = float(self.probs[mask])
        return out

    def marginal(self, i):
        """``P(site i in X)`` summed from the table."""
        masks = np.arange(self.probs.size)
        return float(np.sum(self.probs[(masks >> i) & 1 == 1]))


def _principal_minors(M):
    """``det M[T, T]`` for every subset ``T`` (indexed by bitmask)."""
    n = M.shape[0]
    out = np.empty(1 << n)
    out[0] = 1.0
    masks = np.arange(1 << n)
    popcount = np.array([bin(m).count("1") for m in range(1 << n)])
    bits = (masks[:, None] >> np.arange(n)) & 1
    for k in range(1, n + 1):
        sel = masks[popcount == k]
        idx = np.nonzero(bits[sel])[1].reshape(sel.size, k)
        sub = M[idx[:, :, None], idx[:, None, :]]
        out[sel] = np.real(np.linalg.det(sub))
    return out


def _superset_moebius(D, n):
    """``P(S) = sum_{T >= S} (-1)^{|T - S|} D(T)`` for all S at once."""
    P = D.copy()
    for i in range(n):
        bit = 1 << i
        P = P.reshape(-1, 2, bit)
        P[:, 0, :] -= P[:, 1, :]
        P = P.reshape(-1)
    return P


def _clamp(p):
    p = np.asarray(p, dtype=float)
    p = np.where((p < 0) & (p > -1e-10), 0.0, p)
    return np.where((p > 1) & (p < 1 + 1e-10), 1.0, p)


def _small_window(symbol, window):
    window = as_window(window)
    if window.size > EXACT_MAX:
        raise WindowTooLargeForExactDistributionError(
            f"exact enumeration needs |W| <= {EXACT_MAX}, got {window.size}")
    M = _kernel_matrix(symbol, window)
    return window, (M.real if np.all(M.imag == 0) else M)


def cylinder_probability(symbol: SpectralSymbol, window, subset) -> float:
    """``P(X cap W = S)`` by inclusion-exclusion over supersets of ``S``.

    Raises
    ------
    WindowTooLargeForExactDistributionError
        ``|W| > 14``.
    NotASubsetError
        ``S`` is not contained in ``W``.
    """
    window, M = _small_window(symbol, window)
    n = window.size
    s_idx = window.index_of(np.asarray(list(subset))) if len(subset) else np.zeros(0, np.int64)
    rest = np.setdiff1d(np.arange(n), s_idx)
    total = 0.0
    for r in range(rest.size + 1):
        sign = -1.0 if r % 2 else 1.0
        for extra in itertools.combinations(rest.tolist(), r):
            T = np.concatenate([s_idx, np.asarray(extra, dtype=np.int64)])
            det = 1.0 if T.size == 0 else float(np.real(np.linalg.det(M[np.ix_(T, T)])))
            total += sign * det
    return float(_clamp(total))


def cylinder_probability_signed(symbol: SpectralSymbol, window, subset) -> float:
    """Cross-check via ``|det(K_W - I_{W minus S})|``."""
    window, M = _small_window(symbol, window)
    s_idx = window.index_of(np.asarray(list(subset))) if len(subset) else np.zeros(0, np.int64)
    J = np.ones(window.size)
    J[s_idx] = 0.0
    return float(abs(np.linalg.det(M - np.diag(J))))


def exact_distribution(symbol: SpectralSymbol, window) -> SubsetDistribution:
    """All ``2^|W|`` cylinder probabilities.

    Every principal minor is computed once, then the superset Moebius
    transform applies inclusion-exclusion to all subsets simultaneously.
    """
    window, M = _small_window(symbol, window)
    n = window.size
    P = _clamp(_superset_moebius(_principal_minors(M), n))
    P.setflags(write=False)
    return SubsetDistribution(window, P)
