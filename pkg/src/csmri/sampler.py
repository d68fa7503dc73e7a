"""Annealed Langevin dynamics posterior sampling and multi-chain statistics.

One Langevin step at annealing index t is

    x_{t+1} = x_t + eta_t ( f(x_t; beta_t) + A^H (y - A x_t) / (gamma_t^2 + sigma^2) )
              + sqrt(2 eta_t) zeta_t

on the stacked real/imaginary representation, with f the prior's smoothed
score, zeta_t standard normal per real channel, and x_0 ~ N_c(0, I).

``sigma`` here is the noise standard deviation **per real component** of the
stacked representation — the scale the data-consistency term divides by. An
acquisition that added complex noise of total variance sigma_c^2 (the
:func:`csmri.acquisition.acquire` convention) corresponds to
``sigma = sigma_c / sqrt(2)``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionModel, DimensionMismatchError
from .signal import ComplexImage, KSpace, fft2c, ifft2c


class DivergenceError(RuntimeError):
    """Chain norm exceeded 10^6 x its initialization norm."""

    def __init__(self, message, step, chain=None):
        super().__init__(message)
        self.step = step
        self.chain = chain


@dataclass(frozen=True, eq=False)
class AnnealingSchedule:
    """Per-step sequences {beta_t}, {gamma_t}, {eta_t}, already expanded.

    ``betas`` is nonincreasing and positive (strict decrease holds across
    levels; within a level the value repeats), ``gammas`` is nonincreasing
    and nonnegative with the final value at most the final beta, ``etas``
    is nonnegative (zero only in degenerate diagnostics).
    """

    betas: np.ndarray
    gammas: np.ndarray
    etas: np.ndarray

    def __post_init__(self):
        b = np.array(self.betas, dtype=np.float64, copy=True)
        g = np.array(self.gammas, dtype=np.float64, copy=True)
        e = np.array(self.etas, dtype=np.float64, copy=True)
        if not (b.ndim == g.ndim == e.ndim == 1) or not (len(b) == len(g) == len(e)):
            raise ValueError("betas/gammas/etas must be 1-D with equal length")
        if len(b) < 1:
            raise ValueError("schedule must have at least one step")
        if np.any(b <= 0) or np.any(np.diff(b) > 0):
            raise ValueError("betas must be positive and nonincreasing")
        if np.any(g < 0) or np.any(np.diff(g) > 0):
            raise ValueError("gammas must be nonnegative and nonincreasing")
        if g[-1] > b[-1] + 1e-12:
            raise ValueError("final gamma must not exceed final beta")
        if np.any(e < 0):
            raise ValueError("etas must be nonnegative")
        for name, arr in (("betas", b), ("gammas", g), ("etas", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps(self):
        return len(self.betas)


def make_schedule(
    beta_begin=232.0,
    beta_end=0.0066,
    levels=100,
    steps_per_level=3,
    eta0=1e-5,
    gamma_rule="beta",
) -> AnnealingSchedule:
    """Geometric beta ladder with eta_t = eta0 (beta_t / beta_end)^2.

    gamma_rule "beta" sets gamma_t = beta_t (the default annealed
    likelihood); "zero" sets gamma_t = 0 so the data term uses the true
    likelihood throughout.
    """
    if beta_begin <= beta_end or beta_end <= 0:
        raise ValueError("need beta_begin > beta_end > 0")
    if levels < 1 or steps_per_level < 1:
        raise ValueError("levels and steps_per_level must be >= 1")
    if eta0 < 0:
        raise ValueError("eta0 must be >= 0")
    level_betas = np.geomspace(beta_begin, beta_end, levels)
    betas = np.repeat(level_betas, steps_per_level)
    etas = eta0 * (betas / level_betas[-1]) ** 2
    if gamma_rule == "beta":
        gammas = betas.copy()
    elif gamma_rule == "zero":
        gammas = np.zeros_like(betas)
    else:
        raise ValueError(f"unknown gamma_rule {gamma_rule!r}")
    return AnnealingSchedule(betas, gammas, etas)


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def langevin_posterior(
    model: AcquisitionModel,
    y: KSpace,
    prior,
    schedule: AnnealingSchedule,
    sigma,
    seed=0,
) -> ComplexImage:
    """Run one annealed Langevin chain and return its final state.

    Deterministic per seed. Raises :class:`DivergenceError` if the chain
    norm exceeds 10^6 x the initialization norm (or turns non-finite).
    """
    h, w = model.shape
    n = h * w
    if y.data.shape != model.sens.maps.shape:
        raise DimensionMismatchError(
            f"k-space {y.data.shape} does not match model {model.sens.maps.shape}"
        )
    if getattr(prior, "dim", None) != 2 * n:
        raise DimensionMismatchError(
            f"prior dimension {getattr(prior, 'dim', None)} != 2*{n}"
        )
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    denominators = schedule.gammas**2 + sigma**2
    if np.any(denominators <= 0.0):
        raise ValueError(
            "gamma_t^2 + sigma^2 vanishes at some step; "
            "use sigma > 0 or a gamma rule that stays positive"
        )

    maps = model.sens.maps
    kept = model.mask.kept
    y_masked = np.where(kept[None], y.data, 0.0)
    rng = _as_generator(seed)

    v = rng.standard_normal(2 * n) * math.sqrt(0.5)  # x_0 ~ N_c(0, I)
    guard = 1e6 * max(float(np.linalg.norm(v)), 1e-12)
    for t in range(schedule.steps):
        x = (v[:n] + 1j * v[n:]).reshape(h, w)
        ks = fft2c(maps * x[None])
        ks[:, ~kept] = 0.0
        resid_img = np.sum(np.conj(maps) * ifft2c(y_masked - ks), axis=0)
        dc = np.concatenate([resid_img.real.ravel(), resid_img.imag.ravel()])
        s = prior.score(v, schedule.betas[t])
        eta = schedule.etas[t]
        v = (
            v
            + eta * (s + dc / denominators[t])
            + math.sqrt(2.0 * eta) * rng.standard_normal(2 * n)
        )
        vnorm = float(np.linalg.norm(v))
        if not math.isfinite(vnorm) or vnorm > guard:
            raise DivergenceError(
                f"chain norm {vnorm:.3e} exceeded the divergence guard at "
                f"step {t}",
                step=t,
            )
    return ComplexImage((v[:n] + 1j * v[n:]).reshape(h, w))


@dataclass(frozen=True, eq=False)
class PosteriorSampleSet:
    """K chain outputs with their pixel-wise mean and standard deviation.

    ``std`` uses the population convention sqrt(sum_i |x_i - mean|^2 / K)
    on complex deviations, so it is a real nonnegative image.
    """

    draws: tuple
    mean: ComplexImage
    std: np.ndarray


def _derive_chain_seeds(seed, chains):
    state = np.random.SeedSequence(seed).generate_state(chains, dtype=np.uint64)
    return [int(s) for s in state]


def posterior_ensemble(
    model: AcquisitionModel,
    y: KSpace,
    prior,
    schedule: AnnealingSchedule,
    sigma,
    chains=48,
    seed=0,
    chain_seeds=None,
    threads=1,
) -> PosteriorSampleSet:
    """Run independent chains and aggregate mean/std.

    Chain seeds derive from ``seed`` unless ``chain_seeds`` is given
    explicitly. Aggregation always happens in sorted-chain-seed order, so
    permuting an explicit seed list changes nothing, and the thread count
    never affects the result.
    """
    if chain_seeds is None:
        if chains < 1:
            raise ValueError("chains must be >= 1")
        chain_seeds = _derive_chain_seeds(seed, chains)
    elif len(chain_seeds) < 1:
        raise ValueError("chain_seeds must be non-empty")
    order = np.argsort(np.asarray(chain_seeds, dtype=np.uint64), kind="stable")
    sorted_seeds = [int(chain_seeds[i]) for i in order]

    def run(idx_seed):
        idx, s = idx_seed
        try:
            return langevin_posterior(model, y, prior, schedule, sigma, seed=s)
        except DivergenceError as err:
            raise DivergenceError(
                f"chain {idx} (seed {s}): {err}", step=err.step, chain=idx
            ) from err

    jobs = list(enumerate(sorted_seeds))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = list(pool.map(run, jobs))
    else:
        draws = [run(job) for job in jobs]

    stack = np.stack([d.data for d in draws])
    mean = stack.mean(axis=0)
    std = np.sqrt(np.mean(np.abs(stack - mean[None]) ** 2, axis=0))
    return PosteriorSampleSet(tuple(draws), ComplexImage(mean), std)
