"""Compressed-sensing MRI with posterior sampling.

Simulation (phantoms, coil maps, undersampling masks, noisy k-space),
classical estimators (zero-filled, MVUE, RSS, l1-wavelet), annealed
Langevin posterior sampling with per-pixel uncertainty, image-quality
metrics, and finite-distribution transport/posterior tooling that checks
the robustness claims numerically.

Set CSMRI_DISABLE_NUMBA=1 before import to run the pure-numpy kernel
fallbacks instead of the JIT-compiled ones.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    acquisition,
    estimators,
    kernels,
    metrics,
    priors,
    sampler,
    signal,
    theory,
)
