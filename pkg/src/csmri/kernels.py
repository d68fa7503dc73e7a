"""Hot numerical kernels with numba and pure-numpy implementations.

Two kernel families live here because they sit inside tight loops:

* ``mixture_terms`` — joint log-density / score / responsibilities of a
  diagonal-covariance Gaussian mixture, evaluated for a batch of points.
  Called once per Langevin step and once per ISTA-free prior query.
* ``haar2_analysis`` / ``haar2_synthesis`` — orthonormal 2-D Haar wavelet
  transform used by the l1-wavelet reconstruction, one pair per iteration.

Each kernel has a loop implementation (compiled with numba when enabled) and
a vectorized numpy implementation. The active path is chosen at import time
by :data:`csmri._jit.NUMBA_ENABLED`; both stay importable for equivalence
tests and for ``benchmarks/bench_kernels.py``.
"""

import math

import numpy as np

from ._jit import NUMBA_ENABLED, njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Gaussian mixture terms
# ---------------------------------------------------------------------------


def _mixture_terms_loops(x, means, variances, log_weights):
    b_n, d = x.shape
    k_n = means.shape[0]
    logpdf = np.empty(b_n)
    score = np.zeros((b_n, d))
    resp = np.empty((b_n, k_n))
    loga = np.empty(k_n)

    # Per-component normalization constant, shared across the batch.
    const = np.empty(k_n)
    for k in range(k_n):
        acc = 0.0
        for j in range(d):
            acc += math.log(2.0 * math.pi * variances[k, j])
        const[k] = acc

    for b in range(b_n):
        for k in range(k_n):
            quad = 0.0
            for j in range(d):
                diff = x[b, j] - means[k, j]
                quad += diff * diff / variances[k, j]
            loga[k] = log_weights[k] - 0.5 * (quad + const[k])
        m = loga[0]
        for k in range(1, k_n):
            if loga[k] > m:
                m = loga[k]
        s = 0.0
        for k in range(k_n):
            s += math.exp(loga[k] - m)
        lz = m + math.log(s)
        logpdf[b] = lz
        for k in range(k_n):
            r = math.exp(loga[k] - lz)
            resp[b, k] = r
            for j in range(d):
                score[b, j] -= r * (x[b, j] - means[k, j]) / variances[k, j]
    return logpdf, score, resp


def _mixture_terms_numpy(x, means, variances, log_weights):
    diff = x[:, None, :] - means[None, :, :]
    quad = np.sum(diff * diff / variances[None, :, :], axis=2)
    const = np.sum(np.log(2.0 * np.pi * variances), axis=1)
    loga = log_weights[None, :] - 0.5 * (quad + const[None, :])
    m = np.max(loga, axis=1)
    lz = m + np.log(np.sum(np.exp(loga - m[:, None]), axis=1))
    resp = np.exp(loga - lz[:, None])
    score = -np.einsum("bk,bkj->bj", resp, diff / variances[None, :, :])
    return lz, score, resp


if NUMBA_ENABLED:
    _mixture_terms_jit = njit(cache=True)(_mixture_terms_loops)
    _mixture_terms_impl = _mixture_terms_jit
else:
    _mixture_terms_jit = None
    _mixture_terms_impl = _mixture_terms_numpy


def mixture_terms(x, means, variances, log_weights):
    """Evaluate a diagonal Gaussian mixture at a batch of points.

    Parameters
    ----------
    x : (B, d) array
        Evaluation points.
    means : (K, d) array
        Component means.
    variances : (K, d) array
        Per-component diagonal variances (strictly positive; any smoothing
        has already been folded in by the caller).
    log_weights : (K,) array
        Log of the mixture weights.

    Returns
    -------
    logpdf : (B,) array
    score : (B, d) array
        Gradient of the log-density at each point.
    resp : (B, K) array
        Posterior component responsibilities at each point (rows sum to 1).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    means = np.ascontiguousarray(means, dtype=np.float64)
    variances = np.ascontiguousarray(variances, dtype=np.float64)
    log_weights = np.ascontiguousarray(log_weights, dtype=np.float64)
    if x.ndim != 2 or means.ndim != 2 or variances.shape != means.shape:
        raise ValueError("mixture_terms: inconsistent argument shapes")
    if x.shape[1] != means.shape[1] or log_weights.shape != (means.shape[0],):
        raise ValueError("mixture_terms: inconsistent argument shapes")
    return _mixture_terms_impl(x, means, variances, log_weights)


# ---------------------------------------------------------------------------
# Orthonormal 2-D Haar transform
# ---------------------------------------------------------------------------


def max_haar_levels(height, width):
    """Largest decomposition depth dividing both dimensions."""
    levels = 0
    while height % 2 == 0 and width % 2 == 0 and min(height, width) >> 1 >= 1:
        levels += 1
        height >>= 1
        width >>= 1
    return levels


def _haar2_analysis_loops(x, levels):
    h, w = x.shape
    out = x.copy()
    tmp = np.empty(max(h, w))
    bh, bw = h, w
    for _ in range(levels):
        half_w = bw // 2
        for r in range(bh):
            for c in range(half_w):
                a = out[r, 2 * c]
                b = out[r, 2 * c + 1]
                tmp[c] = (a + b) * _INV_SQRT2
                tmp[half_w + c] = (a - b) * _INV_SQRT2
            for c in range(bw):
                out[r, c] = tmp[c]
        half_h = bh // 2
        for c in range(bw):
            for r in range(half_h):
                a = out[2 * r, c]
                b = out[2 * r + 1, c]
                tmp[r] = (a + b) * _INV_SQRT2
                tmp[half_h + r] = (a - b) * _INV_SQRT2
            for r in range(bh):
                out[r, c] = tmp[r]
        bh = half_h
        bw = half_w
    return out


def _haar2_synthesis_loops(coeffs, levels):
    h, w = coeffs.shape
    out = coeffs.copy()
    tmp = np.empty(max(h, w))
    for lev in range(levels - 1, -1, -1):
        bh = h >> lev
        bw = w >> lev
        half_h = bh // 2
        for c in range(bw):
            for r in range(half_h):
                s = out[r, c]
                d = out[half_h + r, c]
                tmp[2 * r] = (s + d) * _INV_SQRT2
                tmp[2 * r + 1] = (s - d) * _INV_SQRT2
            for r in range(bh):
                out[r, c] = tmp[r]
        half_w = bw // 2
        for r in range(bh):
            for c in range(half_w):
                s = out[r, c]
                d = out[r, half_w + c]
                tmp[2 * c] = (s + d) * _INV_SQRT2
                tmp[2 * c + 1] = (s - d) * _INV_SQRT2
            for c in range(bw):
                out[r, c] = tmp[c]
    return out


def _haar2_analysis_numpy(x, levels):
    out = x.copy()
    bh, bw = x.shape
    for _ in range(levels):
        block = out[:bh, :bw]
        even = block[:, 0::2]
        odd = block[:, 1::2]
        block = np.concatenate([even + odd, even - odd], axis=1) * _INV_SQRT2
        even = block[0::2, :]
        odd = block[1::2, :]
        block = np.concatenate([even + odd, even - odd], axis=0) * _INV_SQRT2
        out[:bh, :bw] = block
        bh //= 2
        bw //= 2
    return out


def _haar2_synthesis_numpy(coeffs, levels):
    h, w = coeffs.shape
    out = coeffs.copy()
    for lev in range(levels - 1, -1, -1):
        bh = h >> lev
        bw = w >> lev
        block = out[:bh, :bw]
        s = block[: bh // 2, :]
        d = block[bh // 2 :, :]
        merged = np.empty((bh, bw))
        merged[0::2, :] = (s + d) * _INV_SQRT2
        merged[1::2, :] = (s - d) * _INV_SQRT2
        s = merged[:, : bw // 2]
        d = merged[:, bw // 2 :]
        block = np.empty((bh, bw))
        block[:, 0::2] = (s + d) * _INV_SQRT2
        block[:, 1::2] = (s - d) * _INV_SQRT2
        out[:bh, :bw] = block
    return out


if NUMBA_ENABLED:
    _haar2_analysis_jit = njit(cache=True)(_haar2_analysis_loops)
    _haar2_synthesis_jit = njit(cache=True)(_haar2_synthesis_loops)
    _haar2_analysis_impl = _haar2_analysis_jit
    _haar2_synthesis_impl = _haar2_synthesis_jit
else:
    _haar2_analysis_jit = None
    _haar2_synthesis_jit = None
    _haar2_analysis_impl = _haar2_analysis_numpy
    _haar2_synthesis_impl = _haar2_synthesis_numpy


def _check_haar_args(arr, levels):
    if arr.ndim != 2:
        raise ValueError("haar transform expects a 2-D array")
    h, w = arr.shape
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if h % (1 << levels) or w % (1 << levels):
        raise ValueError(
            f"dimensions {h}x{w} not divisible by 2^levels (levels={levels})"
        )


def haar2_analysis(x, levels):
    """Forward orthonormal 2-D Haar transform (standard quadrant layout)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    _check_haar_args(x, levels)
    return _haar2_analysis_impl(x, levels)


def haar2_synthesis(coeffs, levels):
    """Inverse of :func:`haar2_analysis`."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    _check_haar_args(coeffs, levels)
    return _haar2_synthesis_impl(coeffs, levels)


def warmup():
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    x = np.zeros((2, 4))
    mixture_terms(x, np.zeros((1, 4)), np.ones((1, 4)), np.zeros(1))
    haar2_synthesis(haar2_analysis(np.zeros((4, 4)), 2), 2)
