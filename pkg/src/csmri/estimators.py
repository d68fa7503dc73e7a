"""Classical reconstructions: zero-filled, MVUE, RSS, and l1-wavelet ISTA."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .acquisition import AcquisitionModel, adjoint, forward
from .signal import ComplexImage, KSpace, fft2c, ifft2c


class SingularOperatorError(ValueError):
    """Normal operator is identically zero (all-zero sensitivities)."""


class StepSizeError(RuntimeError):
    """ISTA objective increased; the step size exceeds 1/||A||^2."""


class DegenerateScaleError(ArithmeticError):
    """99th-percentile normalization scale is zero."""


@dataclass(frozen=True)
class CgSettings:
    max_iters: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class CgResult:
    """Solution of the normal equations plus convergence bookkeeping.

    ``residuals[i]`` is the relative normal-equation residual after i
    iterations (``residuals[0]`` = 1 for a zero start); the sequence is
    nonincreasing by construction of the solver.
    """

    image: ComplexImage
    converged: bool
    iterations: int
    residuals: tuple


def zero_filled(model: AcquisitionModel, k: KSpace) -> ComplexImage:
    """Coil-combined adjoint of the masked k-space (the naive estimate)."""
    return adjoint(model, k)


def _normal_apply(model, arr):
    ks = fft2c(model.sens.maps * arr[None])
    ks[:, ~model.mask.kept] = 0.0
    return np.sum(np.conj(model.sens.maps) * ifft2c(ks), axis=0)


def _real_dot(a, b):
    # Inner product of the stacked real/imaginary representation.
    return float(np.vdot(a, b).real)


def mvue(model: AcquisitionModel, k: KSpace, cg: CgSettings = CgSettings()) -> CgResult:
    """Least-squares coil-combined estimate, solving A^H A x = A^H y.

    The solver is the conjugate-residual variant of CG on the stacked
    real/imaginary representation (complex arrays with the real inner
    product), which minimizes the normal-equation residual over the Krylov
    space and therefore makes the residual history nonincreasing. On
    non-convergence the best iterate is returned with ``converged=False``.
    """
    if model.sens.sum_squares().max() <= 0.0:
        raise SingularOperatorError("coil maps are identically zero")
    b = adjoint(model, k).data
    bnorm = math.sqrt(_real_dot(b, b))
    if bnorm == 0.0:
        zero = ComplexImage(np.zeros(model.shape, dtype=complex))
        return CgResult(zero, True, 0, (0.0,))

    x = np.zeros_like(b)
    r = b.copy()
    nr = _normal_apply(model, r)
    p = r.copy()
    np_ = nr.copy()
    rho = _real_dot(r, nr)
    residuals = [1.0]
    converged = False
    for _ in range(cg.max_iters):
        denom = _real_dot(np_, np_)
        if rho <= 0.0 or denom <= 0.0:
            break  # residual lies in the null space; no further progress
        alpha = rho / denom
        x = x + alpha * p
        r = r - alpha * np_
        rel = math.sqrt(_real_dot(r, r)) / bnorm
        residuals.append(rel)
        if rel <= cg.tol:
            converged = True
            break
        nr = _normal_apply(model, r)
        rho_new = _real_dot(r, nr)
        beta = rho_new / rho
        rho = rho_new
        p = r + beta * p
        np_ = nr + beta * np_
    return CgResult(ComplexImage(x), converged, len(residuals) - 1, tuple(residuals))


def rss(k: KSpace) -> np.ndarray:
    """Root-sum-of-squares coil combination of fully sampled k-space."""
    return np.sqrt(np.sum(np.abs(ifft2c(k.data)) ** 2, axis=0))


@dataclass(frozen=True)
class WaveletSettings:
    levels: int
    lam: float = 0.01
    iters: int = 100
    step: float = None

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be > 0")


@dataclass(frozen=True)
class IstaResult:
    """ISTA iterate plus its objective history (length iters + 1)."""

    image: ComplexImage
    objectives: tuple


def _soft_threshold(arr, thr):
    return np.sign(arr) * np.maximum(np.abs(arr) - thr, 0.0)


def l1_wavelet(
    model: AcquisitionModel, k: KSpace, settings: WaveletSettings
) -> IstaResult:
    """ISTA for the l1-wavelet regularized problem.

    Minimizes (1/2)||A x - y||^2 + lam (||W Re x||_1 + ||W Im x||_1) with W
    the orthonormal 2-D Haar transform applied to the real and imaginary
    channels separately. The objective is nonincreasing whenever
    step <= 1/||A||^2; an increase raises :class:`StepSizeError`.
    """
    h, w = model.shape
    if h % (1 << settings.levels) or w % (1 << settings.levels):
        raise ValueError(
            f"2^levels must divide both dimensions ({h}x{w}, "
            f"levels={settings.levels})"
        )
    ssq_max = float(model.sens.sum_squares().max())
    if ssq_max <= 0.0:
        raise SingularOperatorError("coil maps are identically zero")
    step = settings.step if settings.step is not None else 1.0 / ssq_max
    lam = settings.lam
    lv = settings.levels
    y = np.where(model.mask.kept[None], k.data, 0.0)

    def l1_term(arr):
        if lam == 0.0:
            return 0.0
        return lam * (
            np.abs(kernels.haar2_analysis(arr.real, lv)).sum()
            + np.abs(kernels.haar2_analysis(arr.imag, lv)).sum()
        )

    x = np.zeros((h, w), dtype=complex)
    objectives = []
    for it in range(settings.iters):
        fx = forward(model, ComplexImage(x)).data
        resid = fx - y
        obj = 0.5 * float(np.vdot(resid, resid).real) + l1_term(x)
        if objectives and obj > objectives[-1] + 1e-10 * (1.0 + abs(objectives[-1])):
            raise StepSizeError(
                f"objective increased at iteration {it} "
                f"({objectives[-1]:.6e} -> {obj:.6e}); reduce step"
            )
        objectives.append(obj)
        grad = adjoint(model, KSpace(resid)).data
        z = x - step * grad
        thr = step * lam
        cr = _soft_threshold(kernels.haar2_analysis(z.real, lv), thr)
        ci = _soft_threshold(kernels.haar2_analysis(z.imag, lv), thr)
        x = kernels.haar2_synthesis(cr, lv) + 1j * kernels.haar2_synthesis(ci, lv)

    fx = forward(model, ComplexImage(x)).data
    resid = fx - y
    obj = 0.5 * float(np.vdot(resid, resid).real) + l1_term(x)
    if objectives and obj > objectives[-1] + 1e-10 * (1.0 + abs(objectives[-1])):
        raise StepSizeError(
            f"objective increased at iteration {settings.iters} "
            f"({objectives[-1]:.6e} -> {obj:.6e}); reduce step"
        )
    objectives.append(obj)
    return IstaResult(ComplexImage(x), tuple(objectives))


def percentile_99(values: np.ndarray) -> float:
    """Nearest-rank 99th percentile: the ceil(0.99 n)-th order statistic."""
    flat = np.sort(np.asarray(values).ravel())
    if flat.size == 0:
        raise ValueError("empty input")
    rank = max(int(math.ceil(0.99 * flat.size)), 1)
    return float(flat[rank - 1])


def normalize_99(img: ComplexImage):
    """Divide by the nearest-rank 99th percentile of |img|; return (image, scale)."""
    scale = percentile_99(np.abs(img.data))
    if scale <= 0.0:
        raise DegenerateScaleError("99th-percentile scale is zero")
    return ComplexImage(img.data / scale), scale
