"""Multi-coil measurement model: masks, coils, phantoms, and the forward map.

The forward model is y_i = P F S_i x + w_i per coil: point-wise coil
weighting, centered unitary 2-D DFT, k-space sampling mask, and (in
:func:`acquire`) circularly symmetric complex Gaussian noise of total
variance sigma^2 per kept sample.
"""

import math
from dataclasses import dataclass

import numpy as np

from .signal import (
    ComplexImage,
    KSpace,
    fft2c,
    ifft2c,
    read_image_stack,
    read_mask_array,
    stacked_to_image,
    write_image_stack,
    write_mask_array,
)

MASK_KINDS = (
    "equispaced-vertical",
    "equispaced-horizontal",
    "uniform-random-vertical",
    "uniform-random-horizontal",
    "poisson-2d",
)

SUPPORT_FLOOR = 0.05


class DimensionMismatchError(ValueError):
    """Inputs to the forward model disagree in shape."""


class InfeasibleAccelerationError(ValueError):
    """Requested acceleration cannot be met (kept lines would undercut ACS)."""


# ---------------------------------------------------------------------------
# Sampling masks
# ---------------------------------------------------------------------------


def _acs_range(length, acs):
    start = (length - acs) // 2
    return start, start + acs


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Boolean k-space keep pattern plus its generation metadata.

    ``pattern_kind`` is "custom" for masks not built by :func:`make_mask`
    (e.g. read back from disk without a sidecar); ACS validation only applies
    to the known kinds.
    """

    kept: np.ndarray
    pattern_kind: str = "custom"
    acs_lines: int = 0

    def __post_init__(self):
        kept = np.array(self.kept, dtype=bool, order="C", copy=True)
        if kept.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not kept.any():
            raise ValueError("mask keeps no location")
        kept.setflags(write=False)
        object.__setattr__(self, "kept", kept)
        if self.acs_lines > 0 and self.pattern_kind in MASK_KINDS:
            self._check_acs()

    def _check_acs(self):
        h, w = self.kept.shape
        acs = self.acs_lines
        if self.pattern_kind.endswith("vertical"):
            lo, hi = _acs_range(w, acs)
            ok = bool(self.kept[:, lo:hi].all())
        elif self.pattern_kind.endswith("horizontal"):
            lo, hi = _acs_range(h, acs)
            ok = bool(self.kept[lo:hi, :].all())
        else:
            rlo, rhi = _acs_range(h, acs)
            clo, chi = _acs_range(w, acs)
            ok = bool(self.kept[rlo:rhi, clo:chi].all())
        if not ok:
            raise ValueError("ACS region is not fully kept")

    @property
    def height(self):
        return self.kept.shape[0]

    @property
    def width(self):
        return self.kept.shape[1]

    @property
    def acceleration(self):
        """True acceleration R = (height*width) / kept count, exact."""
        return self.kept.size / int(np.count_nonzero(self.kept))


def _line_mask(height, width, kept_lines, vertical):
    kept = np.zeros((height, width), dtype=bool)
    idx = sorted(kept_lines)
    if vertical:
        kept[:, idx] = True
    else:
        kept[idx, :] = True
    return kept


def _equispaced_lines(lines, target, acs_set):
    # Search stride/offset for the union (comb + ACS) closest to the target
    # line count. Ties break toward smaller stride then smaller offset, so
    # the result is deterministic without a seed.
    acs_list = sorted(acs_set)
    best = None
    for stride in range(1, lines + 1):
        hist = [0] * stride
        for a in acs_list:
            hist[a % stride] += 1
        for offset in range(stride):
            comb = (lines - offset + stride - 1) // stride
            count = comb + len(acs_list) - hist[offset]
            diff = abs(count - target)
            if best is None or diff < best[0]:
                best = (diff, stride, offset)
        if best[0] == 0:
            break
    _, stride, offset = best
    return set(range(offset, lines, stride)) | acs_set


def _random_lines(lines, target, acs_set, seed):
    rng = np.random.default_rng(seed)
    pool = np.array([i for i in range(lines) if i not in acs_set])
    extra = target - len(acs_set)
    chosen = rng.choice(pool, size=extra, replace=False) if extra > 0 else []
    return set(int(c) for c in chosen) | acs_set


def _poisson_darts(height, width, acs, scale, order, radii):
    kept = np.zeros((height, width), dtype=bool)
    rlo, rhi = _acs_range(height, acs)
    clo, chi = _acs_range(width, acs)
    kept[rlo:rhi, clo:chi] = True
    ys, xs = np.divmod(order, width)
    for y, x, base in zip(ys, xs, radii):
        if kept[y, x]:
            continue
        r = scale * base
        w = int(math.ceil(r))
        window = kept[max(0, y - w) : y + w + 1, max(0, x - w) : x + w + 1]
        if window.any():
            wy, wx = np.nonzero(window)
            dy = wy - (y - max(0, y - w))
            dx = wx - (x - max(0, x - w))
            if np.min(dy * dy + dx * dx) < r * r:
                continue
        kept[y, x] = True
    return kept


def _poisson_mask(height, width, r, acs, seed):
    n = height * width
    target = int(round(n / r))
    if target < max(acs * acs, 1):
        raise InfeasibleAccelerationError(
            f"R={r} keeps {target} samples, fewer than the {acs}x{acs} ACS block"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    ys, xs = np.divmod(order, width)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    maxdist = math.hypot(cy, cx)
    rho = np.hypot(ys - cy, xs - cx) / maxdist
    radii = 0.5 + 1.5 * rho  # variable density: sparser away from the center

    lo, hi = 0.25, float(max(height, width))
    best = None
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        kept = _poisson_darts(height, width, acs, mid, order, radii)
        count = int(np.count_nonzero(kept))
        diff = abs(count - target)
        if best is None or diff < best[0]:
            best = (diff, kept)
        if count > target:
            lo = mid
        else:
            hi = mid
        if diff == 0:
            break
    return best[1]


def make_mask(kind, height, width, r, acs, seed=0) -> SamplingMask:
    """Build a sampling mask of the requested kind and acceleration.

    The ACS region (central ``acs`` lines, or an acs x acs block for
    poisson-2d) is always fully kept. The achieved acceleration is the true
    R = N/L and lands within a line of the target for line masks.
    """
    if kind not in MASK_KINDS:
        raise ValueError(f"unknown mask kind {kind!r}")
    if r < 1:
        raise ValueError(f"acceleration must be >= 1, got {r}")
    if height < 1 or width < 1:
        raise ValueError("mask dimensions must be positive")
    vertical = kind.endswith("vertical")
    lines = width if vertical else height
    if kind != "poisson-2d" and not 0 <= acs <= lines:
        raise ValueError(f"acs={acs} does not fit within {lines} lines")
    if kind == "poisson-2d" and not 0 <= acs <= min(height, width):
        raise ValueError(f"acs={acs} block does not fit in {height}x{width}")

    if r == 1.0:
        kept = np.ones((height, width), dtype=bool)
        return SamplingMask(kept, kind, acs)

    if kind == "poisson-2d":
        kept = _poisson_mask(height, width, r, acs, seed)
        return SamplingMask(kept, kind, acs)

    target = int(round(lines / r))
    if target < max(acs, 1):
        raise InfeasibleAccelerationError(
            f"R={r} keeps {target} lines, fewer than acs={acs}"
        )
    lo, hi = _acs_range(lines, acs)
    acs_set = set(range(lo, hi))
    if kind.startswith("equispaced"):
        chosen = _equispaced_lines(lines, target, acs_set)
    else:
        chosen = _random_lines(lines, target, acs_set, seed)
    return SamplingMask(_line_mask(height, width, chosen, vertical), kind, acs)


def save_mask(mask: SamplingMask, path) -> None:
    write_mask_array(mask.kept, path)


def load_mask(path, pattern_kind="custom", acs_lines=0) -> SamplingMask:
    return SamplingMask(read_mask_array(path), pattern_kind, acs_lines)


# ---------------------------------------------------------------------------
# Coil sensitivities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoilProfile:
    """Parameters of the simulated coil geometry.

    One Gaussian-magnitude lobe per coil, centered on a circle of relative
    radius ``rel_radius`` around the FOV center (a single coil sits at the
    center), width ``rel_width`` relative to the larger dimension, with a
    random linear phase ramp of at most ``phase_cycles`` across the FOV.
    """

    kind: str = "gaussian-lobes"
    rel_radius: float = 0.45
    rel_width: float = 1.0
    phase_cycles: float = 0.5
    max_gradient: float = 0.35


@dataclass(frozen=True, eq=False)
class CoilSensitivities:
    maps: np.ndarray

    def __post_init__(self):
        arr = np.array(self.maps, dtype=np.complex128, order="C", copy=True)
        if arr.ndim != 3:
            raise ValueError("coil maps must be 3-D (coils, height, width)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coil maps contain NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "maps", arr)

    @property
    def coils(self):
        return self.maps.shape[0]

    @property
    def height(self):
        return self.maps.shape[1]

    @property
    def width(self):
        return self.maps.shape[2]

    def sum_squares(self) -> np.ndarray:
        """Pixel-wise sum of |S_i|^2 (the SENSE normal-operator diagonal)."""
        return np.sum(np.abs(self.maps) ** 2, axis=0)


def simulate_coils(
    coils, height, width, profile: CoilProfile = CoilProfile(), seed=0
) -> CoilSensitivities:
    """Simulate smooth complex sensitivity maps.

    Gaussian-lobe maps are normalized so max sum-of-squares is 1 and are
    guaranteed to keep the sum of squares >= 0.05 over the whole grid, which
    keeps the coil-combined inverse problem well posed everywhere.
    """
    if coils < 1:
        raise ValueError("coils must be >= 1")
    if profile.kind == "uniform":
        return CoilSensitivities(np.ones((coils, height, width), dtype=complex))
    if profile.kind != "gaussian-lobes":
        raise ValueError(f"unknown coil profile kind {profile.kind!r}")

    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(float)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    ring = 0.0 if coils == 1 else profile.rel_radius * min(height, width) / 2.0
    w = profile.rel_width * max(height, width) / 2.0
    maps = np.empty((coils, height, width), dtype=complex)
    angle0 = rng.uniform(0.0, 2.0 * math.pi)
    for i in range(coils):
        theta = angle0 + 2.0 * math.pi * i / coils
        ly, lx = cy + ring * math.sin(theta), cx + ring * math.cos(theta)
        mag = np.exp(-((y - ly) ** 2 + (x - lx) ** 2) / (2.0 * w * w))
        fx, fy = rng.uniform(-profile.phase_cycles, profile.phase_cycles, size=2)
        phi0 = rng.uniform(0.0, 2.0 * math.pi)
        phase = 2.0 * math.pi * (fx * x / width + fy * y / height) + phi0
        maps[i] = mag * np.exp(1j * phase)
    ssq = np.sum(np.abs(maps) ** 2, axis=0)
    maps /= math.sqrt(ssq.max())
    ssq /= ssq.max()
    if ssq.min() < SUPPORT_FLOOR:
        raise ValueError(
            f"profile leaves coverage {ssq.min():.3g} < {SUPPORT_FLOOR} "
            "somewhere; widen rel_width or rel_radius"
        )
    grad = max(
        np.abs(np.diff(maps, axis=1)).max(), np.abs(np.diff(maps, axis=2)).max()
    )
    if grad > profile.max_gradient:
        raise ValueError(
            f"maps violate the smoothness bound: gradient {grad:.3g} > "
            f"{profile.max_gradient}"
        )
    return CoilSensitivities(maps)


def save_coils(sens: CoilSensitivities, path) -> None:
    write_image_stack(sens.maps, path)


def load_coils(path) -> CoilSensitivities:
    return CoilSensitivities(read_image_stack(path))


# ---------------------------------------------------------------------------
# Phantoms
# ---------------------------------------------------------------------------

# (intensity, semi-axis a, semi-axis b, x center, y center, angle degrees)
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _shepp_logan(height, width):
    yy = np.linspace(1.0, -1.0, height)[:, None]
    xx = np.linspace(-1.0, 1.0, width)[None, :]
    img = np.zeros((height, width))
    for inten, a, b, x0, y0, ang in _SHEPP_LOGAN:
        rad = math.radians(ang)
        c, s = math.cos(rad), math.sin(rad)
        xr = (xx - x0) * c + (yy - y0) * s
        yr = -(xx - x0) * s + (yy - y0) * c
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += inten
    return np.clip(img, 0.0, 1.0)


def make_phantom(
    kind, height, width, seed=0, phase_amplitude=0.0, prior=None
) -> ComplexImage:
    """Synthetic ground-truth image.

    "shepp-logan" is the classic ellipse phantom (magnitude in [0, 1], max
    exactly 1 in the skull shell) with an optional smooth synthetic phase of
    peak ``phase_amplitude`` radians. "gmm-sample" draws a stacked
    real/imaginary vector from ``prior`` (a :mod:`csmri.priors` object of
    dimension 2*height*width), deterministic per seed.
    """
    if kind == "shepp-logan":
        mag = _shepp_logan(height, width)
        if phase_amplitude != 0.0:
            yy = np.linspace(-1.0, 1.0, height)[:, None]
            xx = np.linspace(-1.0, 1.0, width)[None, :]
            phase = phase_amplitude * (xx * xx - yy * yy + 0.5 * xx * yy)
            return ComplexImage(mag * np.exp(1j * phase))
        return ComplexImage(mag.astype(complex))
    if kind == "gmm-sample":
        if prior is None:
            raise ValueError("gmm-sample requires a prior")
        vec = prior.sample(np.random.default_rng(seed))
        if vec.shape != (2 * height * width,):
            raise DimensionMismatchError(
                f"prior dimension {vec.shape[0]} != 2*{height}*{width}"
            )
        return stacked_to_image(vec, height, width)
    raise ValueError(f"unknown phantom kind {kind!r}")


# ---------------------------------------------------------------------------
# Forward model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcquisitionModel:
    """Coil maps + mask + noise level; realizes the linear operator A."""

    sens: CoilSensitivities
    mask: SamplingMask
    noise_sigma: float = 0.0

    def __post_init__(self):
        if (self.sens.height, self.sens.width) != (
            self.mask.height,
            self.mask.width,
        ):
            raise DimensionMismatchError(
                f"coil maps {self.sens.height}x{self.sens.width} vs mask "
                f"{self.mask.height}x{self.mask.width}"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def shape(self):
        return (self.sens.height, self.sens.width)


def _check_image(model, x: ComplexImage):
    if x.shape != model.shape:
        raise DimensionMismatchError(
            f"image {x.shape} does not match model {model.shape}"
        )


def _check_kspace(model, k: KSpace):
    if k.shape != model.sens.maps.shape:
        raise DimensionMismatchError(
            f"k-space {k.shape} does not match model {model.sens.maps.shape}"
        )


def forward(model: AcquisitionModel, x: ComplexImage) -> KSpace:
    """y_i = P F S_i x per coil; masked-out entries exactly zero."""
    _check_image(model, x)
    coil_ksp = fft2c(model.sens.maps * x.data[None, :, :])
    coil_ksp[:, ~model.mask.kept] = 0.0
    return KSpace(coil_ksp)


def adjoint(model: AcquisitionModel, k: KSpace) -> ComplexImage:
    """Sum_i conj(S_i) F^H P^H k_i; exact adjoint of :func:`forward`."""
    _check_kspace(model, k)
    masked = np.where(model.mask.kept[None, :, :], k.data, 0.0)
    return ComplexImage(np.sum(np.conj(model.sens.maps) * ifft2c(masked), axis=0))


def acquire(model: AcquisitionModel, x: ComplexImage, seed=0) -> KSpace:
    """Noisy acquisition: forward(x) plus N_c(0, sigma^2) noise on kept entries.

    sigma = model.noise_sigma is the *total* complex standard deviation, so
    each real component gets sigma/sqrt(2). One RNG stream per coil, derived
    from the seed by a fixed rule, keeps a parallel coil loop deterministic.
    """
    clean = forward(model, x)
    if model.noise_sigma == 0.0:
        return clean
    h, w = model.shape
    scale = model.noise_sigma / math.sqrt(2.0)
    noisy = np.array(clean.data)
    for i in range(model.sens.coils):
        rng = np.random.default_rng([seed, i])
        noise = scale * (
            rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
        )
        noisy[i] += np.where(model.mask.kept, noise, 0.0)
    return KSpace(noisy)


def default_sigma(x: ComplexImage, sens: CoilSensitivities) -> float:
    """Default noise level: 0.01 x the 99th-percentile magnitude of the
    noiseless fully sampled k-space of the input."""
    coil_ksp = fft2c(sens.maps * x.data[None, :, :])
    mags = np.sort(np.abs(coil_ksp).ravel())
    rank = max(int(math.ceil(0.99 * mags.size)), 1)
    return 0.01 * float(mags[rank - 1])
