"""Analytic priors and their noise-conditional score functions.

Every prior lives on the stacked real/imaginary representation of an image
(a real vector of length 2N). ``score(x, beta)`` is the exact gradient of
log(mu * N(0, beta^2 I)) — the beta-smoothed log-density — which is what the
annealed Langevin sampler consumes at each noise level.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .signal import read_image

PROB_TOL = 1e-12


class SingularCovarianceError(ValueError):
    """Smoothed covariance is singular (beta = 0 with zero-variance directions)."""


def _as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _categorical(rng, probs, size=None):
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    u = rng.random(size)
    return np.searchsorted(cum, u, side="right")


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """N(mean, diag + low_rank @ low_rank.T), optionally low-rank-plus-diagonal.

    The smoothed covariance diag + beta^2 must be strictly positive for
    score/log_density; a zero-variance direction with beta = 0 raises
    :class:`SingularCovarianceError` even when the low-rank part would cover
    it (the Woodbury inverse used here needs the diagonal to be invertible).
    """

    mean: np.ndarray
    diag: np.ndarray
    low_rank: np.ndarray = None

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64, copy=True)
        diag = np.array(self.diag, dtype=np.float64, copy=True)
        if mean.ndim != 1 or diag.shape != mean.shape:
            raise ValueError("mean and diag must be 1-D with equal length")
        if np.any(diag < 0) or not np.all(np.isfinite(diag)):
            raise ValueError("diagonal variances must be finite and >= 0")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        for name, arr in (("mean", mean), ("diag", diag)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.low_rank is not None:
            lr = np.array(self.low_rank, dtype=np.float64, copy=True)
            if lr.ndim != 2 or lr.shape[0] != mean.shape[0]:
                raise ValueError("low_rank must be (dim, rank)")
            if not np.all(np.isfinite(lr)):
                raise ValueError("low_rank must be finite")
            lr.setflags(write=False)
            object.__setattr__(self, "low_rank", lr)

    @property
    def dim(self):
        return self.mean.shape[0]

    def _smoothed_diag(self, beta):
        d = self.diag + beta * beta
        if np.any(d <= 0.0):
            raise SingularCovarianceError(
                "smoothed covariance has a zero-variance direction"
            )
        return d

    def score(self, x, beta=0.0):
        x = np.asarray(x, dtype=np.float64)
        d = self._smoothed_diag(beta)
        r = (x - self.mean) / d
        if self.low_rank is None:
            return -r
        u = self.low_rank
        # Woodbury: (D + U U^T)^-1 v = D^-1 v - D^-1 U (I + U^T D^-1 U)^-1 U^T D^-1 v
        core = np.eye(u.shape[1]) + (u.T / d) @ u
        return -(r - (u / d[:, None]) @ np.linalg.solve(core, u.T @ r))

    def log_density(self, x, beta=0.0):
        x = np.asarray(x, dtype=np.float64)
        d = self._smoothed_diag(beta)
        delta = x - self.mean
        if self.low_rank is None:
            quad = np.sum(delta * delta / d)
            logdet = np.sum(np.log(d))
        else:
            u = self.low_rank
            core = np.eye(u.shape[1]) + (u.T / d) @ u
            r = delta / d
            quad = np.sum(delta * r) - (u.T @ r) @ np.linalg.solve(core, u.T @ r)
            logdet = np.sum(np.log(d)) + np.linalg.slogdet(core)[1]
        return -0.5 * (quad + logdet + self.dim * math.log(2.0 * math.pi))

    def sample(self, rng):
        rng = _as_generator(rng)
        x = self.mean + np.sqrt(self.diag) * rng.standard_normal(self.dim)
        if self.low_rank is not None:
            x = x + self.low_rank @ rng.standard_normal(self.low_rank.shape[1])
        return x


@dataclass(frozen=True, eq=False)
class GaussianMixturePrior:
    """Mixture of diagonal Gaussians; smoothing maps variances -> var + beta^2."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        m = np.array(self.means, dtype=np.float64, copy=True)
        v = np.array(self.variances, dtype=np.float64, copy=True)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("need at least one component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
            raise ValueError("weights must be >= 0 and sum to 1")
        if m.ndim != 2 or m.shape[0] != w.size or v.shape != m.shape:
            raise ValueError("means/variances must be (components, dim)")
        if np.any(v < 0) or not np.all(np.isfinite(m)) or not np.all(np.isfinite(v)):
            raise ValueError("means/variances must be finite, variances >= 0")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def mean(self):
        return self.weights @ self.means

    def _terms(self, x, beta):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        v = self.variances + beta * beta
        if np.any(v <= 0.0):
            raise SingularCovarianceError(
                "smoothed covariance has a zero-variance direction"
            )
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return kernels.mixture_terms(x, self.means, v, logw)

    def score(self, x, beta=0.0):
        _, s, _ = self._terms(x, beta)
        return s[0] if np.asarray(x).ndim == 1 else s

    def log_density(self, x, beta=0.0):
        lp, _, _ = self._terms(x, beta)
        return float(lp[0]) if np.asarray(x).ndim == 1 else lp

    def responsibilities(self, x, beta=0.0):
        _, _, r = self._terms(x, beta)
        return r[0] if np.asarray(x).ndim == 1 else r

    def sample(self, rng):
        rng = _as_generator(rng)
        k = int(_categorical(rng, self.weights))
        return self.means[k] + np.sqrt(self.variances[k]) * rng.standard_normal(
            self.dim
        )


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Discrete distribution over vectors; atoms (K, dim), probs (K,)."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        a = np.array(self.atoms, dtype=np.float64, copy=True)
        p = np.array(self.probs, dtype=np.float64, copy=True)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError("atoms must be (count, dim) with count >= 1")
        if p.shape != (a.shape[0],):
            raise ValueError("probs length must match atom count")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("probs must be >= 0 and sum to 1 within 1e-12")
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "probs", p)

    @property
    def dim(self):
        return self.atoms.shape[1]

    @property
    def count(self):
        return self.atoms.shape[0]

    def _terms(self, x, beta):
        if beta <= 0.0:
            raise SingularCovarianceError(
                "finite distributions need beta > 0 for a smooth density"
            )
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        v = np.full_like(self.atoms, beta * beta)
        with np.errstate(divide="ignore"):
            logw = np.log(self.probs)
        return kernels.mixture_terms(x, self.atoms, v, logw)

    def score(self, x, beta):
        _, s, _ = self._terms(x, beta)
        return s[0] if np.asarray(x).ndim == 1 else s

    def log_density(self, x, beta):
        lp, _, _ = self._terms(x, beta)
        return float(lp[0]) if np.asarray(x).ndim == 1 else lp

    def sample(self, rng):
        rng = _as_generator(rng)
        return self.atoms[int(_categorical(rng, self.probs))].copy()


def score(prior, x, beta):
    """Exact gradient of the beta-smoothed log-density at x."""
    return prior.score(x, beta)


def log_density(prior, x, beta):
    return prior.log_density(x, beta)


def sample(prior, seed):
    """One exact draw; deterministic per seed (int or Generator)."""
    return prior.sample(_as_generator(seed))


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------


def _resolve_vector(value, dim, what):
    if isinstance(value, dict) and "image" in value:
        img = read_image(value["image"])
        vec = np.concatenate([img.data.real.ravel(), img.data.imag.ravel()])
    elif isinstance(value, (int, float)):
        if dim is None:
            raise ValueError(f"scalar {what} needs an explicit dim")
        vec = np.full(dim, float(value))
    else:
        vec = np.asarray(value, dtype=np.float64)
    if dim is not None and vec.shape != (dim,):
        raise ValueError(f"{what} has length {vec.shape}, expected ({dim},)")
    return vec


def from_config(cfg, dim=None):
    """Build a prior from a JSON-style dict.

    Supported forms::

        {"type": "gaussian", "mean": <vec>, "diag": <vec>}
        {"type": "gmm", "components": [{"weight": w, "mean": <vec>,
                                        "variance": <vec>}, ...]}
        {"type": "finite", "atoms": [{"probability": p, "vector": <vec>}, ...]}

    ``<vec>`` is an inline list, a scalar (broadcast to ``dim``), or
    ``{"image": path}`` referencing a stored image whose stacked
    real/imaginary channels become the vector.
    """
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ValueError("prior config must be a dict with a 'type' key")
    kind = cfg["type"]
    if kind == "gaussian":
        mean = _resolve_vector(cfg["mean"], dim, "mean")
        diag = _resolve_vector(cfg["diag"], dim or mean.shape[0], "diag")
        return GaussianPrior(mean, diag)
    if kind == "gmm":
        comps = cfg["components"]
        if not comps:
            raise ValueError("gmm needs at least one component")
        means = [_resolve_vector(c["mean"], dim, "mean") for c in comps]
        d = dim or means[0].shape[0]
        variances = [_resolve_vector(c["variance"], d, "variance") for c in comps]
        weights = [float(c["weight"]) for c in comps]
        return GaussianMixturePrior(weights, means, variances)
    if kind == "finite":
        entries = cfg["atoms"]
        if not entries:
            raise ValueError("finite prior needs at least one atom")
        vecs = [_resolve_vector(e["vector"], dim, "vector") for e in entries]
        probs = [float(e["probability"]) for e in entries]
        return FiniteDistribution(np.stack(vecs), probs)
    raise ValueError(f"unknown prior type {kind!r}")
