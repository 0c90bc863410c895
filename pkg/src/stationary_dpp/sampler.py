"""Exact samplers for the process restricted to a finite window.

Two exact algorithms are provided:

``"spectral"``
    The two-phase projection sampler: Bernoulli thinning of the kernel
    eigenvectors followed by sequential selection from the kept
    projection.  Vectorized over many samples at once, best for small and
    medium windows.

``"sequential"``
    The chain-rule (Bernoulli-LDL) sampler: sites are decided one at a time
    from the diagonal of the running Schur complement, with a blocked
    left-looking factorization doing the cubic work in matrix products.  It
    needs no eigendecomposition and is the fast path near the window cap.

Randomness
----------
Sample ``i`` of a batch with master seed ``m`` draws from
``PCG64(SeedSequence(m, spawn_key=(0, i)))``.  Auxiliary streams (bootstrap
resampling and so on) use ``spawn_key=(1, j)``.  Output therefore never
depends on how a batch is split over workers.
"""
from __future__ import annotations

import threading
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import dsyrk

from .errors import DegenerateProjectionError, EmptyConfigurationError, LagExceedsWindowError
from .kernel import Box, KernelWindow, Window

__all__ = [
    "Configuration",
    "SampleBatch",
    "derive_seed",
    "aux_rng",
    "site_ranks",
    "sample",
    "sample_batch",
    "empirical_density",
    "empirical_covariance",
]

SAMPLE_STREAM = 0
AUX_STREAM = 1
PROJECTION_TOL = 1e-6
REORTH_TOL = 1e-8

_PARITY_CACHE = weakref.WeakKeyDictionary()
_CACHE_LOCK = threading.Lock()


def derive_seed(master, i, stream=SAMPLE_STREAM) -> np.random.SeedSequence:
    """Seed of sample ``i``: ``SeedSequence(master, spawn_key=(stream, i))``."""
    return np.random.SeedSequence(int(master), spawn_key=(int(stream), int(i)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def aux_rng(master, j=0) -> np.random.Generator:
    """Generator for auxiliary stream ``j`` (bootstrap and similar)."""
    return _rng(derive_seed(master, j, AUX_STREAM))


def site_ranks(window: Window) -> np.ndarray:
    """Position of each site's uniform in the per-sample random stream.

    In one dimension the rank of site ``n`` is ``2n`` for ``n >= 0`` and
    ``-2n - 1`` otherwise, so a site keeps its uniform whatever window it
    is observed through.  Higher dimensional windows use window order.
    """
    if window.dimension != 1:
        return np.arange(window.size, dtype=np.int64)
    n = window.points[:, 0]
    return np.where(n >= 0, 2 * n, -2 * n - 1)


# ---------------------------------------------------------------------------
# configurations

def _rle(bits):
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        return []
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    edges = np.concatenate([[0], change, [bits.size]])
    runs = np.diff(edges).tolist()
    # runs alternate starting with zeros
    return runs if not bits[0] else [0] + runs


def _unrle(runs, n):
    out = np.zeros(n, dtype=bool)
    pos, val = 0, False
    for r in runs:
        out[pos:pos + r] = val
        pos += r
        val = not val
    if pos != n:
        raise ValueError("run lengths do not add up to the window size")
    return out


@dataclass(frozen=True, eq=False)
class Configuration:
    """Occupation bits ``xi`` over a window.

    Attributes
    ----------
    window : Window
    bits : ndarray of bool
        ``bits[i]`` is 1 iff the i-th window site (lexicographic order) is a
        point.
    seed : tuple or int or None
        ``(master, index)`` for batch members, or the seed passed to
        :func:`sample`.
    """

    window: Window
    bits: np.ndarray
    seed: object = None

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.window.size,):
            raise ValueError("bit vector length must equal the window size")
        object.__setattr__(self, "bits", bits)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def points(self) -> np.ndarray:
        """Sampled sites, shape ``(count, d)`` (``(count,)`` when d = 1)."""
        pts = self.window.points[self.bits]
        return pts[:, 0] if self.window.dimension == 1 else pts

    def __eq__(self, other):
        return (isinstance(other, Configuration) and self.window == other.window
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.window, self.bits.tobytes()))

    def to_dict(self):
        """Run-length encoded form: runs alternate zeros and ones, zeros first."""
        w = self.window
        if isinstance(w, Box):
            wd = {"type": "box", "origin": w.origin.tolist(), "sides": w.sides.tolist()}
        else:
            wd = {"type": "explicit", "points": w.points.tolist()}
        seed = list(self.seed) if isinstance(self.seed, tuple) else self.seed
        return {"window": wd, "rle": _rle(self.bits), "seed": seed}

    @classmethod
    def from_dict(cls, d):
        from .kernel import Explicit

        wd = d["window"]
        w = Box(wd["origin"], wd["sides"]) if wd["type"] == "box" else Explicit(wd["points"])
        seed = tuple(d["seed"]) if isinstance(d.get("seed"), list) else d.get("seed")
        return cls(w, _unrle(d["rle"], w.size), seed)


class SampleBatch:
    """Reproducible collection of configurations on one window.

    The bits of all samples are held in one ``(count, |W|)`` boolean array;
    :class:`Configuration` objects are created on access.
    """

    def __init__(self, kernel: KernelWindow, master_seed, bits, method):
        self.kernel = kernel
        self.window = kernel.window
        self.master_seed = int(master_seed)
        self.bits = bits
        self.method = method

    @property
    def count(self):
        return self.bits.shape[0]

    def __len__(self):
        return self.count

    def __getitem__(self, i) -> Configuration:
        i = range(self.count)[i]
        return Configuration(self.window, self.bits[i], (self.master_seed, i))

    def __iter__(self):
        for i in range(self.count):
            yield self[i]

    @property
    def configurations(self):
        return list(self)

    def seed_of(self, i) -> np.random.SeedSequence:
        return derive_seed(self.master_seed, i)

    def counts(self):
        """Number of points in each sample."""
        return np.count_nonzero(self.bits, axis=1)


# ---------------------------------------------------------------------------
# projection (spectral) sampler, batched

def _spectral_chunk(lam, V, U1, U2):
    """Exact projection sampling for a block of samples.

    Parameters
    ----------
    lam : (n,) eigenvalues, V : (n, n) eigenvectors as columns
    U1, U2 : (B, n) uniforms for the two phases

    Phase 2 is run in the row space of the kept eigenvectors: with ``c_s``
    the orthonormalized rows of the already chosen sites, the conditional
    weight of site ``x`` is ``|V_x|^2 - sum_s |<V_x, c_s>|^2``.
    """
    B, n = U1.shape
    keep = U1 < lam[None, :]
    k = keep.sum(axis=1)
    kmax = int(k.max()) if B else 0
    out = np.zeros((B, n), dtype=bool)
    if kmax == 0:
        return out
    # compact the kept columns to the left, zero padded
    rank = np.cumsum(keep, axis=1) - 1
    Vb = np.zeros((B, n, kmax), dtype=V.dtype)
    bi, ci = np.nonzero(keep)
    Vb[bi, :, rank[bi, ci]] = V[:, ci].T
    d = np.einsum("bnk,bnk->bn", Vb, Vb.conj()).real
    C = np.zeros((B, kmax, kmax), dtype=V.dtype)
    rows = np.arange(B)
    for t in range(kmax):
        active = k > t
        if not np.any(active):
            break
        rem = (k - t).astype(float)
        tot = d.sum(axis=1)
        if np.any(np.abs(tot[active] - rem[active]) > PROJECTION_TOL):
            raise DegenerateProjectionError(
                f"projection weights sum to {tot[active].tolist()[:3]}, expected {rem[active].tolist()[:3]}")
        cum = np.cumsum(np.clip(d, 0.0, None), axis=1)
        x = (cum < (U2[:, t] * cum[:, -1])[:, None]).sum(axis=1)
        x = np.minimum(x, n - 1)
        out[rows[active], x[active]] = True
        r = Vb[rows, x, :]
        nrm = np.sqrt(np.sum(np.abs(r) ** 2, axis=1))
        if t:
            Ct = C[:, :t]
            for _ in range(2):
                coef = Ct.conj() @ r[:, :, None]
                r = r - (coef.transpose(0, 2, 1) @ Ct)[:, 0]
                nrm = np.sqrt(np.sum(np.abs(r) ** 2, axis=1))
                # second pass only if the first one lost orthogonality
                loss = np.abs(Ct.conj() @ r[:, :, None])[:, :, 0].max(axis=1)
                if np.all(loss[active] <= REORTH_TOL * np.maximum(nrm[active], 1e-300)):
                    break
        nrm = np.where(active, nrm, 1.0)
        if np.any(nrm[active] <= 0):
            raise DegenerateProjectionError("selected site has zero residual weight")
        c = r / nrm[:, None]
        c[~active] = 0
        C[:, t] = c
        d -= np.abs((Vb @ c.conj()[:, :, None])[:, :, 0]) ** 2
        d[rows[active], x[active]] = 0.0
        d[~active] = 0.0
    return out


# ---------------------------------------------------------------------------
# chain-rule (Bernoulli LDL) sampler

def _ldl_decide(A, u, outer=512, inner=128):
    """Run the chain rule on Hermitian ``A`` in place, returning inclusions.

    Site ``j`` is included iff ``u[j] < p_j`` with ``p_j`` the diagonal of the
    current Schur complement; the pivot is then ``p_j`` if included and
    ``p_j - 1`` otherwise, which conditions on the outcome.  Only the lower
    triangle and the diagonal ``outer`` blocks of ``A`` are read.
    """
    n = A.shape[0]
    piv = np.empty(n)
    keep = np.zeros(n, dtype=bool)
    for j0 in range(0, n, outer):
        j1 = min(j0 + outer, n)
        if j0:
            A[j0:, j0:j1] -= A[j0:, :j0] @ (A[j0:j1, :j0] * piv[:j0]).conj().T
        for i0 in range(j0, j1, inner):
            i1 = min(i0 + inner, j1)
            if i0 > j0:
                A[i0:, i0:i1] -= A[i0:, j0:i0] @ (A[i0:i1, j0:i0] * piv[j0:i0]).conj().T
            blk = A[i0:i1, i0:i1]
            b = i1 - i0
            for jj in range(b):
                p = blk[jj, jj].real
                inc = u[i0 + jj] < p
                keep[i0 + jj] = inc
                q = p if inc else p - 1.0
                piv[i0 + jj] = q
                if jj + 1 < b:
                    s = blk[jj + 1:, jj] / q
                    blk[jj + 1:, jj + 1:] -= np.outer(s, blk[jj, jj + 1:])
                    blk[jj + 1:, jj] = s
            if i1 < n:
                L = np.tril(blk, -1)
                L[np.diag_indices(b)] = 1.0
                Linv = sla.solve_triangular(L, np.eye(b), lower=True, unit_diagonal=True,
                                            check_finite=False)
                A[i1:, i0:i1] = A[i1:, i0:i1] @ (Linv.conj().T / piv[i0:i1])
    return keep


def _parity_split(M):
    """True when the kernel vanishes at every nonzero even lag (1-d, real)."""
    if M.dtype.kind != "f" or M.shape[0] < 3:
        return False
    return not np.any(M[0, 2::2]) and not np.any(M[2::2, 0])


def _parity_bases(kernel, M):
    """Cached odd-block bases ``C + G / (1 - s)`` and ``C - G / s``.

    ``G = B B^T`` couples odd to even sites and ``s`` is the (constant)
    diagonal.  With them each sample needs one rank-k update over the
    smaller of its kept and rejected even sites.
    """
    key = kernel if kernel is not None else None
    with _CACHE_LOCK:
        hit = _PARITY_CACHE.get(key) if key is not None else None
    if hit is not None:
        return hit
    s = float(M[0, 0])
    B = np.asfortranarray(M[1::2, 0::2])
    # upper triangles in Fortran order: their transposes are C-ordered lower triangles
    G = dsyrk(1.0, B, lower=0)
    C = np.triu(M[1::2, 1::2])
    out = (np.asfortranarray(C + G / (1.0 - s)), np.asfortranarray(C - G / s), B, s)
    for a in out[:3]:
        a.setflags(write=False)
    if key is not None:
        with _CACHE_LOCK:
            _PARITY_CACHE[key] = out
    return out


def _sequential_one(M, u, parity, outer=512, kernel=None):
    n = M.shape[0]
    if not parity:
        A = np.array(M, order="C", copy=True)
        return _ldl_decide(A, u, outer)
    # even sites are mutually uncorrelated (constant diagonal s): decide them
    # first, then eliminate them from the odd block.  The update is
    # -B_P B_P^T / s + B_N B_N^T / (1 - s); one of the two products is
    # replaced by the cached G = B_P B_P^T + B_N B_N^T.
    ev = np.arange(0, n, 2)
    od = np.arange(1, n, 2)
    base_n, base_p, B, s = _parity_bases(kernel, M)
    inc_e = u[ev] < s
    w = 1.0 / s + 1.0 / (1.0 - s)
    if inc_e.sum() <= (~inc_e).sum():
        C, cols, sign = base_n, inc_e, -1.0
    else:
        C, cols, sign = base_p, ~inc_e, 1.0
    C = np.array(C, order="F", copy=True)
    if np.any(cols):
        C = dsyrk(sign * w, np.asfortranarray(B[:, cols]), beta=1.0, c=C, lower=0, overwrite_c=1)
    A = C.T
    m = A.shape[0]
    for j0 in range(0, m, outer):
        j1 = min(j0 + outer, m)
        blk = A[j0:j1, j0:j1]
        blk[...] = np.tril(blk) + np.tril(blk, -1).T
    inc_o = _ldl_decide(A, u[od], outer)
    out = np.empty(n, dtype=bool)
    out[ev] = inc_e
    out[od] = inc_o
    return out


def _sequential_order(window: Window):
    ranks = site_ranks(window)
    return np.argsort(ranks, kind="stable"), ranks


# ---------------------------------------------------------------------------
# public sampling API

_METHODS = ("spectral", "sequential")


def _uniform_len(kernel, method, ranks):
    if kernel.is_diagonal or method == "sequential":
        return int(ranks.max()) + 1
    return 2 * kernel.size


def _draw(seeds, length):
    U = np.empty((len(seeds), length))
    for r, ss in enumerate(seeds):
        U[r] = _rng(ss).random(length)
    return U


def _chunk_size(kernel, method):
    if kernel.is_diagonal:
        return max(1, min(4096, (1 << 22) // max(kernel.size, 1)))
    if method == "sequential":
        return 1
    n = kernel.size
    return max(1, min(4096, (1 << 21) // (n * n)))


def _sample_rows(kernel, seeds, method, nested):
    """Bits for a list of per-sample seeds (one deterministic chunk)."""
    ranks = site_ranks(kernel.window)
    U = _draw(seeds, _uniform_len(kernel, method, ranks))
    n = kernel.size
    if kernel.is_diagonal:
        return U[:, ranks] < kernel.diag[None, :]
    if method == "spectral":
        return _spectral_chunk(kernel.eigenvalues, kernel.eigenvectors, U[:, :n], U[:, n:2 * n])
    M = kernel.matrix
    out = np.empty((len(seeds), n), dtype=bool)
    if nested or kernel.window.dimension != 1 or not isinstance(kernel.window, Box):
        order, _ = _sequential_order(kernel.window)
        Mo = M[np.ix_(order, order)] if not np.array_equal(order, np.arange(n)) else M
        for r in range(len(seeds)):
            out[r, order] = _sequential_one(Mo, U[r, ranks[order]], False)
    else:
        parity = _parity_split(M)
        for r in range(len(seeds)):
            out[r] = _sequential_one(M, U[r, ranks], parity, kernel=kernel)
    return out


def sample(kernel: KernelWindow, seed, method="spectral", nested=True) -> Configuration:
    """Draw one exact configuration.

    Parameters
    ----------
    kernel : KernelWindow
    seed : int or numpy.random.SeedSequence
    method : {"spectral", "sequential"}
        Diagonal kernels always use independent thinning.
    nested : bool
        Sequential method only.  When True, sites are processed in order of
        their stream rank so that samples on nested one-dimensional windows
        sharing a seed agree on the common sites.  ``False`` allows a faster
        elimination order.

    Raises
    ------
    DegenerateProjectionError
    """
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    bits = _sample_rows(kernel, [ss], method, nested)[0]
    return Configuration(kernel.window, bits, seed if not isinstance(seed, np.random.SeedSequence) else None)


def sample_batch(kernel: KernelWindow, master_seed, count, method="spectral", nested=True,
                 workers=1, chunk_size=None) -> SampleBatch:
    """Draw ``count`` configurations with seeds ``derive_seed(master_seed, i)``.

    Work is split into chunks whose size depends only on the kernel and
    method, and results are assembled by sample index, so the output is
    identical for any ``workers``.
    """
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}")
    count = int(count)
    if count < 0:
        raise ValueError("count must be nonnegative")
    if kernel.size == 0:
        raise EmptyConfigurationError("window is empty")
    if method == "spectral" and not kernel.is_diagonal:
        kernel.eigenvalues  # noqa: B018  (decompose once before fan-out)
    cs = int(chunk_size) if chunk_size else _chunk_size(kernel, method)
    starts = list(range(0, count, cs))
    out = np.empty((count, kernel.size), dtype=bool)

    def run(s0):
        seeds = [derive_seed(master_seed, i) for i in range(s0, min(s0 + cs, count))]
        out[s0:s0 + len(seeds)] = _sample_rows(kernel, seeds, method, nested)

    if workers and workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            list(ex.map(run, starts))
    else:
        for s0 in starts:
            run(s0)
    return SampleBatch(kernel, master_seed, out, method)


# ---------------------------------------------------------------------------
# summaries

class DensityEstimate(NamedTuple):
    per_site: np.ndarray
    pooled: float
    se: float


def _bits_of(batch):
    if isinstance(batch, SampleBatch):
        return batch.bits
    if isinstance(batch, Configuration):
        return batch.bits[None, :]
    return np.asarray([c.bits for c in batch])


def empirical_density(batch) -> DensityEstimate:
    """Per-site means, pooled mean and its standard error over samples."""
    bits = _bits_of(batch)
    if bits.shape[0] == 0:
        raise ValueError("batch is empty")
    per_site = bits.mean(axis=0)
    dens = bits.mean(axis=1)
    se = float(dens.std(ddof=1) / np.sqrt(dens.size)) if dens.size > 1 else float("nan")
    return DensityEstimate(per_site, float(dens.mean()), se)


def empirical_covariance(batch: SampleBatch, lag, sigma=None, return_se=False):
    """Average of ``(xi_n - sigma)(xi_{n+lag} - sigma)`` over in-window pairs.

    Parameters
    ----------
    batch : SampleBatch
        Must live on a box with every side longer than the lag.
    lag : int or d-vector
    sigma : float, optional
        Centering constant, the symbol's density by default.
    return_se : bool
        Also return the standard error across samples.

    Raises
    ------
    LagExceedsWindowError
    """
    w = batch.window
    if not isinstance(w, Box):
        raise LagExceedsWindowError("covariance needs a box window")
    lag = np.atleast_1d(np.asarray(lag, dtype=np.int64))
    if lag.shape != (w.dimension,):
        raise ValueError("lag dimension does not match the window")
    if np.any(np.abs(lag) >= w.sides):
        raise LagExceedsWindowError(f"lag {lag.tolist()} does not fit in sides {w.sides.tolist()}")
    if sigma is None:
        sigma = batch.kernel.symbol.sigma
    x = batch.bits.reshape((batch.count,) + tuple(w.sides)).astype(float) - sigma
    a_sl, b_sl = [slice(None)], [slice(None)]
    for l, s in zip(lag, w.sides):
        if l >= 0:
            a_sl.append(slice(0, s - l))
            b_sl.append(slice(l, s))
        else:
            a_sl.append(slice(-l, s))
            b_sl.append(slice(0, s + l))
    prod = x[tuple(a_sl)] * x[tuple(b_sl)]
    per = prod.reshape(batch.count, -1).mean(axis=1)
    est = float(per.mean())
    if not return_se:
        return est
    se = float(per.std(ddof=1) / np.sqrt(per.size)) if per.size > 1 else float("nan")
    return est, se
