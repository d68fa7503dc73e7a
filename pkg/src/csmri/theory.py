"""Transport divergences, covering numbers, posterior oracles, and the
Monte-Carlo validation harnesses for the robustness results.

Everything here operates on :class:`csmri.priors.FiniteDistribution`. The
transport solvers are exact up to float arithmetic: W-infinity runs a binary
search over the finite grid of pairwise distances with max-flow feasibility
checks, W-q runs a successive-shortest-paths min-cost flow, and the
(delta, alpha) split divergence relaxes the flow's marginal capacities to
mu/(1-delta) and nu/(1-alpha), returning a re-verifiable witness.
"""

import math
from dataclasses import dataclass

import numpy as np

from .priors import FiniteDistribution

_EDGE_CAP = 2.0  # exceeds total transportable mass (1), i.e. unbounded
_FLOW_TOL = 1e-9
_RES_TOL = 1e-15


class TheoremPreconditionError(ValueError):
    """The divergence between mu and nu exceeds the configured eps."""


class InconsistentMeasurementsError(ArithmeticError):
    """Every atom's posterior weight underflowed to zero."""


def _check_pair(mu, nu):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def _dist_matrix(a, b, metric="l2"):
    diff = a[:, None, :] - b[None, :, :]
    if metric == "l2":
        return np.sqrt(np.sum(diff * diff, axis=2))
    if metric == "linf":
        return np.max(np.abs(diff), axis=2)
    raise ValueError(f"unknown metric {metric!r}")


def _categorical(rng, probs, size=None):
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(size), side="right")


def _categorical_rows(rng, weights):
    cum = np.cumsum(weights, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(weights.shape[0])
    return np.sum(u[:, None] > cum, axis=1)


# ---------------------------------------------------------------------------
# Flow solvers
# ---------------------------------------------------------------------------


def _max_flow_dense(cap, source, sink):
    """Edmonds-Karp on a dense capacity matrix; returns (value, flow)."""
    n = cap.shape[0]
    residual = cap.copy()
    value = 0.0
    while True:
        parent = np.full(n, -1)
        parent[source] = source
        queue = [source]
        while queue and parent[sink] < 0:
            u = queue.pop(0)
            for v in np.nonzero(residual[u] > _RES_TOL)[0]:
                if parent[v] < 0:
                    parent[v] = u
                    queue.append(int(v))
        if parent[sink] < 0:
            break
        bottleneck = math.inf
        v = sink
        while v != source:
            u = parent[v]
            bottleneck = min(bottleneck, residual[u, v])
            v = u
        v = sink
        while v != source:
            u = parent[v]
            residual[u, v] -= bottleneck
            residual[v, u] += bottleneck
            v = u
        value += bottleneck
    return value, np.maximum(cap - residual, 0.0)


def _transport_flow(cap_mu, cap_nu, allowed):
    """Max transportable mass (capped at 1) with row/column caps on pairs.

    The unit-capacity edge in front of the row side keeps the total at a
    sub-coupling mass of exactly 1 even when the marginal caps sum to more
    (they do whenever delta or alpha is positive).
    """
    k, l = allowed.shape
    n = k + l + 3
    cap = np.zeros((n, n))
    cap[0, 1] = 1.0
    cap[1, 2 : k + 2] = cap_mu
    cap[2 : k + 2, k + 2 : k + 2 + l] = np.where(allowed, _EDGE_CAP, 0.0)
    cap[k + 2 : k + 2 + l, n - 1] = cap_nu
    value, flow = _max_flow_dense(cap, 0, n - 1)
    return value, flow[2 : k + 2, k + 2 : k + 2 + l]


def _smallest_feasible_radius(dist, cap_mu, cap_nu):
    radii = np.unique(dist)

    def feasible(r):
        value, flow = _transport_flow(cap_mu, cap_nu, dist <= r)
        return value >= 1.0 - _FLOW_TOL, flow

    ok, flow = feasible(radii[0])
    if ok:
        return float(radii[0]), flow
    lo, hi = 0, len(radii) - 1
    _, flow_hi = feasible(radii[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, flow = feasible(radii[mid])
        if ok:
            hi, flow_hi = mid, flow
        else:
            lo = mid
    return float(radii[hi]), flow_hi


def wasserstein_inf(mu: FiniteDistribution, nu: FiniteDistribution) -> float:
    """Exact W-infinity distance between two finite distributions."""
    _check_pair(mu, nu)
    radius, _ = _smallest_feasible_radius(
        _dist_matrix(mu.atoms, nu.atoms), mu.probs, nu.probs
    )
    return radius


def _min_cost_transport(p, q_masses, cost):
    """Successive shortest paths with Dijkstra + potentials; exact optimum."""
    k, l = cost.shape
    n = k + l + 2
    s, t = 0, n - 1
    cap = np.zeros((n, n))
    cst = np.zeros((n, n))
    cap[s, 1 : k + 1] = p
    cap[1 : k + 1, k + 1 : k + 1 + l] = _EDGE_CAP
    cst[1 : k + 1, k + 1 : k + 1 + l] = cost
    cst[k + 1 : k + 1 + l, 1 : k + 1] = -cost.T
    cap[k + 1 : k + 1 + l, t] = q_masses
    residual = cap.copy()
    pot = np.zeros(n)
    target = min(p.sum(), q_masses.sum())
    total_cost = 0.0
    flow = 0.0
    while flow < target - _FLOW_TOL:
        dist = np.full(n, math.inf)
        dist[s] = 0.0
        parent = np.full(n, -1)
        done = np.zeros(n, dtype=bool)
        while True:
            cand = np.where(done, math.inf, dist)
            u = int(np.argmin(cand))
            if not math.isfinite(cand[u]):
                break
            done[u] = True
            if u == t:
                break
            for v in np.nonzero(residual[u] > _RES_TOL)[0]:
                if done[v]:
                    continue
                nd = dist[u] + cst[u, v] + pot[u] - pot[v]
                if nd < dist[v] - _RES_TOL:
                    dist[v] = nd
                    parent[v] = u
        if not math.isfinite(dist[t]):
            break
        pot += np.minimum(dist, dist[t])
        bottleneck = math.inf
        v = t
        while v != s:
            u = parent[v]
            bottleneck = min(bottleneck, residual[u, v])
            v = u
        v = t
        while v != s:
            u = parent[v]
            residual[u, v] -= bottleneck
            residual[v, u] += bottleneck
            total_cost += bottleneck * cst[u, v]
            v = u
        flow += bottleneck
    return total_cost


def wasserstein_q(mu: FiniteDistribution, nu: FiniteDistribution, q) -> float:
    """Exact W-q distance via min-cost flow with costs ||u - v||^q."""
    _check_pair(mu, nu)
    if q < 1:
        raise ValueError("q must be >= 1")
    cost = _dist_matrix(mu.atoms, nu.atoms) ** q
    total = _min_cost_transport(mu.probs, nu.probs, cost)
    return float(max(total, 0.0) ** (1.0 / q))


# ---------------------------------------------------------------------------
# Split W-infinity divergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitCertificate:
    """Witness for the (delta, alpha)-W-infinity value.

    ``pairs`` is the sub-coupling flow (i, j, mass) with total mass 1,
    supported on atom pairs within ``epsilon``, whose marginals stay below
    mu/(1-delta) and nu/(1-alpha). ``mu_in_mass``/``nu_in_mass`` are the
    retained masses (1-delta) and (1-alpha) scaled by the achieved flow.
    """

    epsilon: float
    pairs: tuple
    mu_in_mass: float
    nu_in_mass: float


def delta_alpha_winf(mu: FiniteDistribution, nu: FiniteDistribution, delta, alpha):
    """Smallest grid radius with a feasible split coupling, plus its witness."""
    _check_pair(mu, nu)
    if not (0 <= delta < 1 and 0 <= alpha < 1):
        raise ValueError("delta and alpha must lie in [0, 1)")
    dist = _dist_matrix(mu.atoms, nu.atoms)
    radius, flow = _smallest_feasible_radius(
        dist, mu.probs / (1.0 - delta), nu.probs / (1.0 - alpha)
    )
    pairs = tuple(
        (int(i), int(j), float(flow[i, j]))
        for i, j in zip(*np.nonzero(flow > _RES_TOL))
    )
    total = float(flow.sum())
    cert = SplitCertificate(
        epsilon=radius,
        pairs=pairs,
        mu_in_mass=(1.0 - delta) * total,
        nu_in_mass=(1.0 - alpha) * total,
    )
    return radius, cert


def verify_certificate(cert, mu, nu, delta, alpha, tol=_FLOW_TOL):
    """Independently re-check a :class:`SplitCertificate`. Returns bool."""
    k, l = mu.count, nu.count
    marg_mu = np.zeros(k)
    marg_nu = np.zeros(l)
    total = 0.0
    for i, j, f in cert.pairs:
        if f <= 0 or not (0 <= i < k and 0 <= j < l):
            return False
        d = float(np.linalg.norm(mu.atoms[i] - nu.atoms[j]))
        if d > cert.epsilon + 1e-12 * max(1.0, cert.epsilon):
            return False
        marg_mu[i] += f
        marg_nu[j] += f
        total += f
    if abs(total - 1.0) > tol:
        return False
    if np.any(marg_mu > mu.probs / (1.0 - delta) + tol):
        return False
    if np.any(marg_nu > nu.probs / (1.0 - alpha) + tol):
        return False
    return True


# ---------------------------------------------------------------------------
# Approximate covering numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoveringResult:
    """Ball count covering >= 1-delta mass; ``exact=False`` flags the greedy
    upper bound used beyond 20 atoms."""

    count: int
    exact: bool
    centers: tuple


def _candidate_centers(atoms, include_midpoints):
    cands = [atoms]
    if include_midpoints and atoms.shape[0] > 1:
        k = atoms.shape[0]
        idx = np.triu_indices(k, 1)
        cands.append(0.5 * (atoms[idx[0]] + atoms[idx[1]]))
    return np.concatenate(cands, axis=0)


def _exists_cover(masks, raw_mass, probs, k_budget, need):
    """Depth-first search for <= k_budget masks covering >= need mass."""
    suffix_union = [0] * (len(masks) + 1)
    for i in range(len(masks) - 1, -1, -1):
        suffix_union[i] = suffix_union[i + 1] | masks[i]

    def mask_mass(m):
        total = 0.0
        j = 0
        while m:
            if m & 1:
                total += probs[j]
            m >>= 1
            j += 1
        return total

    def dfs(i, k_left, covered, covered_mass):
        if covered_mass >= need:
            return []
        if k_left == 0 or i == len(masks):
            return None
        if covered_mass + k_left * raw_mass[i] < need:
            return None
        if mask_mass(covered | suffix_union[i]) < need:
            return None
        take = dfs(i + 1, k_left - 1, covered | masks[i], mask_mass(covered | masks[i]))
        if take is not None:
            return [i] + take
        return dfs(i + 1, k_left, covered, covered_mass)

    return dfs(0, k_budget, 0, 0.0)


def approx_covering_number(
    mu: FiniteDistribution, eps, delta, include_midpoints=True
) -> CoveringResult:
    """Fewest eps-balls covering all but delta of the mass.

    Candidate centers are the atoms plus (by default) all pairwise
    midpoints; exact branch-and-bound up to 20 atoms, greedy upper bound
    beyond (flagged via ``exact``).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    need = 1.0 - delta - 1e-12
    if need <= 0:
        return CoveringResult(0, True, ())
    atoms, probs = mu.atoms, mu.probs
    k = atoms.shape[0]
    centers = _candidate_centers(atoms, include_midpoints)
    dist = _dist_matrix(centers, atoms)
    member = dist <= eps * (1.0 + 1e-12) + 1e-12

    masks = []
    raw = []
    seen = {}
    for c in range(centers.shape[0]):
        m = 0
        for a in np.nonzero(member[c])[0]:
            m |= 1 << int(a)
        if m == 0 or m in seen:
            continue
        seen[m] = c
        masks.append((m, float(probs[member[c]].sum()), c))
    # Drop masks strictly dominated by a superset.
    masks = [
        trip
        for trip in masks
        if not any(o[0] != trip[0] and (trip[0] | o[0]) == o[0] for o in masks)
    ]
    masks.sort(key=lambda trip: -trip[1])
    bitmasks = [m for m, _, _ in masks]
    raw = [mass for _, mass, _ in masks]
    cidx = [c for _, _, c in masks]

    if k <= 20:
        for budget in range(1, k + 1):
            chosen = _exists_cover(bitmasks, raw, probs, budget, need)
            if chosen is not None:
                sel = tuple(tuple(centers[cidx[i]]) for i in chosen)
                return CoveringResult(len(chosen), True, sel)
        return CoveringResult(k, True, tuple(tuple(a) for a in atoms))

    covered = np.zeros(k, dtype=bool)
    chosen = []
    while probs[covered].sum() < need and len(chosen) < k:
        gains = [probs[member[c] & ~covered].sum() for c in range(centers.shape[0])]
        best = int(np.argmax(gains))
        if gains[best] <= 0:
            break
        covered |= member[best]
        chosen.append(tuple(centers[best]))
    return CoveringResult(len(chosen), False, tuple(chosen))


# ---------------------------------------------------------------------------
# Posterior oracle and measurement ensembles
# ---------------------------------------------------------------------------


def brute_posterior(prior: FiniteDistribution, a, y, sigma, m=None):
    """Exact posterior over the prior's atoms.

    Weights are proportional to prior(z_k) exp(-m ||y - A z_k||^2 /
    (2 sigma^2)), normalized in log space. ``m`` defaults to A's row count,
    matching noise w ~ N(0, (sigma^2/m) I); pass m=1 for plain
    y = A x + sigma * standard-normal measurements.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != prior.dim or y.shape != (a.shape[0],):
        raise ValueError("A must be (rows, dim) and y (rows,)")
    if m is None:
        m = a.shape[0]
    resid = y[None, :] - prior.atoms @ a.T
    with np.errstate(over="ignore"):
        d2 = np.sum(resid * resid, axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(prior.probs) - m * d2 / (2.0 * sigma**2)
    peak = np.max(logw)
    if not np.isfinite(peak):
        raise InconsistentMeasurementsError(
            "all posterior weights vanished at working precision"
        )
    w = np.exp(logw - peak)
    w /= w.sum()
    return FiniteDistribution(prior.atoms, w)


@dataclass(frozen=True)
class GaussianMeasurementEnsemble:
    """A_ij ~ N(0, 1/m), w_i ~ N(0, sigma^2/m)."""

    m: int
    n: int
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def draw(self, rng):
        a = rng.standard_normal((self.m, self.n)) / math.sqrt(self.m)
        w = rng.standard_normal(self.m) * (self.sigma / math.sqrt(self.m))
        return a, w


# ---------------------------------------------------------------------------
# Validation harnesses
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


@dataclass(frozen=True)
class Theorem2Entry:
    metric: str
    eps: float
    fail_alg: float
    fail_ps: float
    se_alg: float
    se_ps: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class Theorem2Report:
    trials: int
    sigma: float
    seed: int
    entries: tuple
    ok: bool
    trial_records: tuple = ()

    def to_dict(self):
        return _jsonable(
            {
                "suite": "theorem2",
                "trials": self.trials,
                "sigma": self.sigma,
                "seed": self.seed,
                "ok": self.ok,
                "entries": [vars(e) for e in self.entries],
            }
        )


def _binom_se(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def validate_theorem2(
    prior: FiniteDistribution,
    a,
    sigma,
    eps_values,
    trials,
    seed=0,
    metrics=("l2", "linf"),
    record_trials=False,
) -> Theorem2Report:
    """Monte-Carlo check that posterior sampling is 2-competitive.

    For the fixed measurement process y = A x* + sigma * g: the reference
    algorithm returns the candidate center (atoms + midpoints) maximizing
    posterior eps-ball mass; posterior sampling draws from the exact
    posterior. The claim delta_ps(2 eps) <= 2 delta_alg(eps) must hold up to
    3 combined Monte-Carlo standard errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    eps_values = [float(e) for e in eps_values]
    if any(e <= 0 for e in eps_values):
        raise ValueError("eps values must be > 0")
    a = np.asarray(a, dtype=np.float64)
    rng = np.random.default_rng(seed)
    atoms, probs = prior.atoms, prior.probs

    ks = _categorical(rng, probs, trials)
    x_true = atoms[ks]
    y = x_true @ a.T + sigma * rng.standard_normal((trials, a.shape[0]))
    az = atoms @ a.T
    d2 = (
        np.sum(y * y, axis=1)[:, None]
        - 2.0 * y @ az.T
        + np.sum(az * az, axis=1)[None, :]
    )
    d2 = np.maximum(d2, 0.0)
    with np.errstate(divide="ignore"):
        logw = np.log(probs)[None, :] - d2 / (2.0 * sigma**2)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    zhat = _categorical_rows(rng, w)

    centers = _candidate_centers(atoms, include_midpoints=True)
    entries = []
    records = []
    for metric in metrics:
        d_atom_center = _dist_matrix(atoms, centers, metric)
        d_atom_atom = _dist_matrix(atoms, atoms, metric)
        err_ps = d_atom_atom[ks, zhat]
        for eps in eps_values:
            ball = d_atom_center <= eps + 1e-12
            mass = w @ ball
            choice = np.argmax(mass, axis=1)
            err_alg = d_atom_center[ks, choice]
            fail_alg = float(np.mean(err_alg > eps + 1e-12))
            fail_ps = float(np.mean(err_ps > 2.0 * eps + 1e-12))
            se_alg = _binom_se(fail_alg, trials)
            se_ps = _binom_se(fail_ps, trials)
            bound = 2.0 * fail_alg + 3.0 * math.sqrt(se_ps**2 + 4.0 * se_alg**2)
            entries.append(
                Theorem2Entry(
                    metric,
                    eps,
                    fail_alg,
                    fail_ps,
                    se_alg,
                    se_ps,
                    bound,
                    fail_ps <= bound,
                )
            )
            if record_trials:
                records.extend(
                    (metric, eps, int(t), float(err_alg[t]), float(err_ps[t]))
                    for t in range(trials)
                )
    return Theorem2Report(
        trials=trials,
        sigma=float(sigma),
        seed=seed,
        entries=tuple(entries),
        ok=all(e.ok for e in entries),
        trial_records=tuple(records),
    )


@dataclass(frozen=True)
class Theorem1Report:
    m_grid: tuple
    c_grid: tuple
    trials: int
    delta: float
    alpha: float
    eps: float
    sigma: float
    seed: int
    divergence: float
    cov_mu: int
    cov_nu: int
    curves: dict
    ses: dict
    passing_c: float
    threshold: float
    curve_ok: bool
    ok: bool
    trial_records: tuple = ()

    def to_dict(self):
        return _jsonable(
            {
                "suite": "theorem1",
                "m_grid": self.m_grid,
                "c_grid": self.c_grid,
                "trials": self.trials,
                "delta": self.delta,
                "alpha": self.alpha,
                "eps": self.eps,
                "sigma": self.sigma,
                "seed": self.seed,
                "divergence": self.divergence,
                "cov_mu": self.cov_mu,
                "cov_nu": self.cov_nu,
                "curves": {str(c): v for c, v in self.curves.items()},
                "passing_c": self.passing_c,
                "threshold": self.threshold,
                "curve_ok": self.curve_ok,
                "ok": self.ok,
            }
        )


def validate_theorem1(
    mu: FiniteDistribution,
    nu: FiniteDistribution,
    delta,
    alpha,
    eps,
    sigma,
    m_grid,
    trials,
    seed=0,
    c_grid=(0.25, 0.5, 1.0, 2.0, 5.0, 20.0),
    slack=0.05,
    record_trials=False,
) -> Theorem1Report:
    """Monte-Carlo check of distributional robustness under a prior shift.

    Samples x* from mu, measures through a fresh Gaussian ensemble per
    trial, and runs posterior sampling under nu. For each c the failure
    curve P(||x* - x_hat|| > c (eps + sigma)) vs m is recorded; the report
    passes when some c keeps the failure rate at the largest m below
    delta + slack, with the smallest such c reported, and that c's curve is
    nonincreasing within 3 combined standard errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if not m_grid or list(m_grid) != sorted(m_grid):
        raise ValueError("m_grid must be a nondecreasing non-empty sequence")
    _check_pair(mu, nu)
    divergence, cert = delta_alpha_winf(mu, nu, delta, alpha)
    if divergence > eps + 1e-12:
        raise TheoremPreconditionError(
            f"(delta, alpha)-W-infinity {divergence:.6g} exceeds eps {eps:.6g}"
        )
    if not verify_certificate(cert, mu, nu, delta, alpha):
        raise AssertionError("split certificate failed re-verification")
    cov_mu = approx_covering_number(mu, sigma, delta).count
    cov_nu = approx_covering_number(nu, sigma, delta).count

    rng = np.random.default_rng(seed)
    n = mu.dim
    threshold_mass = float(delta) + float(slack)
    curves = {float(c): [] for c in c_grid}
    ses = {float(c): [] for c in c_grid}
    records = []
    with np.errstate(divide="ignore"):
        log_nu = np.log(nu.probs)
    for m in m_grid:
        ks = _categorical(rng, mu.probs, trials)
        x_true = mu.atoms[ks]
        a = rng.standard_normal((trials, m, n)) / math.sqrt(m)
        w = rng.standard_normal((trials, m)) * (sigma / math.sqrt(m))
        y = np.einsum("tmn,tn->tm", a, x_true) + w
        az = np.einsum("tmn,kn->tkm", a, nu.atoms)
        d2 = np.sum((y[:, None, :] - az) ** 2, axis=2)
        logw = log_nu[None, :] - m * d2 / (2.0 * sigma**2)
        logw -= logw.max(axis=1, keepdims=True)
        wts = np.exp(logw)
        wts /= wts.sum(axis=1, keepdims=True)
        idx = _categorical_rows(rng, wts)
        err = np.linalg.norm(x_true - nu.atoms[idx], axis=1)
        for c in c_grid:
            rate = float(np.mean(err > c * (eps + sigma)))
            curves[float(c)].append(rate)
            ses[float(c)].append(_binom_se(rate, trials))
        if record_trials:
            records.extend(
                (int(m), int(t), float(err[t])) for t in range(trials)
            )

    passing = [c for c in c_grid if curves[float(c)][-1] <= threshold_mass]
    passing_c = float(min(passing)) if passing else None
    curve_ok = True
    if passing_c is not None:
        rates = curves[passing_c]
        errs = ses[passing_c]
        for i in range(len(rates) - 1):
            noise = 3.0 * math.sqrt(errs[i] ** 2 + errs[i + 1] ** 2)
            if rates[i + 1] > rates[i] + noise:
                curve_ok = False
    return Theorem1Report(
        m_grid=tuple(int(m) for m in m_grid),
        c_grid=tuple(float(c) for c in c_grid),
        trials=trials,
        delta=float(delta),
        alpha=float(alpha),
        eps=float(eps),
        sigma=float(sigma),
        seed=seed,
        divergence=float(divergence),
        cov_mu=cov_mu,
        cov_nu=cov_nu,
        curves=curves,
        ses=ses,
        passing_c=passing_c,
        threshold=threshold_mass,
        curve_ok=curve_ok,
        ok=passing_c is not None and curve_ok,
        trial_records=tuple(records),
    )


@dataclass(frozen=True)
class Lemma1Report:
    q: float
    delta: float
    trials: int
    seed: int
    pair_results: tuple
    counterexample: tuple
    ok: bool

    def to_dict(self):
        return _jsonable(
            {
                "suite": "lemma1",
                "q": self.q,
                "delta": self.delta,
                "trials": self.trials,
                "seed": self.seed,
                "ok": self.ok,
                "pairs": [vars(e) for e in self.pair_results],
                "counterexample": [vars(e) for e in self.counterexample],
            }
        )


@dataclass(frozen=True)
class Lemma1Pair:
    wq: float
    bound: float
    divergence: float
    ok: bool


@dataclass(frozen=True)
class Lemma1Counterexample:
    r: float
    divergence: float
    wq: float
    ok: bool


def _random_finite(rng, max_atoms, dim, scale=3.0):
    k = int(rng.integers(1, max_atoms + 1))
    atoms = scale * rng.standard_normal((k, dim))
    probs = rng.random(k) + 0.05
    probs /= probs.sum()
    return FiniteDistribution(atoms, probs)


def validate_lemma1(
    trials=50,
    max_atoms=6,
    dim=3,
    q=2.0,
    delta=0.1,
    seed=0,
    r_values=(1e2, 1e4, 1e6),
    eps0=0.1,
) -> Lemma1Report:
    """Check W_q <= eps implies (delta, delta)-W-infinity <= eps/delta^(1/q)
    on random pairs, and that the two-point counterexample keeps the split
    divergence at eps0 while W_q grows without bound in r.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    pair_results = []
    for _ in range(trials):
        mu = _random_finite(rng, max_atoms, dim)
        nu = _random_finite(rng, max_atoms, dim)
        wq = wasserstein_q(mu, nu, q)
        bound = wq / delta ** (1.0 / q)
        divergence, cert = delta_alpha_winf(mu, nu, delta, delta)
        ok = divergence <= bound + 1e-9 and verify_certificate(
            cert, mu, nu, delta, delta
        )
        pair_results.append(Lemma1Pair(wq, bound, divergence, ok))

    counterexample = []
    prev_wq = 0.0
    for r in r_values:
        mu = FiniteDistribution(np.array([[0.0], [r]]), [1.0 - delta, delta])
        nu = FiniteDistribution(np.array([[eps0], [-r]]), [1.0 - delta, delta])
        divergence, _ = delta_alpha_winf(mu, nu, delta, delta)
        wq = wasserstein_q(mu, nu, q)
        # The mass at nu's far atom -r must arrive from >= r away, so
        # W_q >= r delta^(1/q); the optimum is ~ r (2 delta)^(1/q).
        ok = (
            divergence <= eps0 + 1e-12
            and wq > prev_wq
            and wq >= r * delta ** (1.0 / q) - 1e-6 * r
        )
        counterexample.append(Lemma1Counterexample(float(r), divergence, wq, ok))
        prev_wq = wq
    ok = all(e.ok for e in pair_results) and all(e.ok for e in counterexample)
    return Lemma1Report(
        q=float(q),
        delta=float(delta),
        trials=trials,
        seed=seed,
        pair_results=tuple(pair_results),
        counterexample=tuple(counterexample),
        ok=ok,
    )
