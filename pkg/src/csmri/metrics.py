"""Image-quality metrics on magnitude images: PSNR, SSIM, masked variants,
and normal-approximation confidence intervals.

All comparisons run on |image|. SSIM uses the standard reference
parameters: 11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03,
population (not sample) covariances, averaged over the valid region only
(no padding). The data range defaults to max|ref| and is recorded in every
report. Infinities (identical images) serialize as the string "inf".
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import ndtri

from .signal import ComplexImage

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
MASK_THRESHOLD = 0.05


class ZeroReferenceError(ValueError):
    """The reference magnitude image is identically zero."""


def _magnitude(img):
    if isinstance(img, ComplexImage):
        return np.abs(img.data)
    arr = np.asarray(img)
    if np.iscomplexobj(arr):
        return np.abs(arr).astype(np.float64)
    return arr.astype(np.float64)


def _pair(ref, rec):
    a = _magnitude(ref)
    b = _magnitude(rec)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _data_range(a, data_range):
    if data_range is None:
        data_range = float(a.max())
    if data_range <= 0:
        raise ZeroReferenceError("reference image has zero data range")
    return float(data_range)


def psnr(ref, rec, data_range=None):
    """20 log10(data_range / RMSE) on magnitudes; inf when identical."""
    a, b = _pair(ref, rec)
    dr = _data_range(a, data_range)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(dr) - 10.0 * math.log10(mse)


def _gaussian_window():
    r = np.arange(WINDOW_SIZE) - (WINDOW_SIZE - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * WINDOW_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _filter_valid(img):
    patches = sliding_window_view(img, _WINDOW.shape)
    return np.tensordot(patches, _WINDOW, axes=([2, 3], [0, 1]))


def ssim(ref, rec, data_range=None):
    """Mean local SSIM over the valid (fully covered) window positions."""
    a, b = _pair(ref, rec)
    if min(a.shape) < WINDOW_SIZE:
        raise ValueError(
            f"image {a.shape} smaller than the {WINDOW_SIZE}x{WINDOW_SIZE} window"
        )
    dr = _data_range(a, data_range)
    c1 = (K1 * dr) ** 2
    c2 = (K2 * dr) ** 2
    mu_a = _filter_valid(a)
    mu_b = _filter_valid(b)
    var_a = _filter_valid(a * a) - mu_a * mu_a
    var_b = _filter_valid(b * b) - mu_b * mu_b
    cov = _filter_valid(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def support_mask(ref, threshold=MASK_THRESHOLD):
    """Boolean mask of pixels with |ref| >= threshold * max|ref|."""
    a = _magnitude(ref)
    peak = float(a.max())
    if peak <= 0:
        raise ZeroReferenceError("reference image is identically zero")
    return a >= threshold * peak


def masked_metrics(ref, rec, threshold=MASK_THRESHOLD):
    """(PSNR, SSIM) after zeroing sub-threshold pixels in both magnitudes."""
    a, b = _pair(ref, rec)
    keep = support_mask(a, threshold)
    am = np.where(keep, a, 0.0)
    bm = np.where(keep, b, 0.0)
    return psnr(am, bm), ssim(am, bm)


def aggregate(values, confidence=0.95):
    """Mean and normal-approximation CI: mean +/- z * s / sqrt(n)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    mean = float(v.mean())
    if v.size == 1:
        return mean, (mean, mean)
    z = float(ndtri(0.5 * (1.0 + confidence)))
    half = z * float(v.std(ddof=1)) / math.sqrt(v.size)
    return mean, (mean - half, mean + half)


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    masked_psnr: float
    masked_ssim: float
    data_range: float
    mask_threshold: float

    def to_dict(self):
        def enc(x):
            return x if math.isfinite(x) else repr(x)

        return {
            "psnr": enc(self.psnr),
            "ssim": enc(self.ssim),
            "masked_psnr": enc(self.masked_psnr),
            "masked_ssim": enc(self.masked_ssim),
            "data_range": self.data_range,
            "mask_threshold": self.mask_threshold,
        }


def evaluate(ref, rec, mask_threshold=MASK_THRESHOLD) -> MetricReport:
    """All four metrics for one reference/reconstruction pair."""
    a, b = _pair(ref, rec)
    mp, ms = masked_metrics(a, b, mask_threshold)
    return MetricReport(
        psnr=psnr(a, b),
        ssim=ssim(a, b),
        masked_psnr=mp,
        masked_ssim=ms,
        data_range=float(a.max()),
        mask_threshold=float(mask_threshold),
    )
