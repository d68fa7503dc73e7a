import itertools
import json
import math

import mpmath
import numpy as np
import pytest

from csmri import theory
from csmri.priors import FiniteDistribution
from csmri.theory import (
    CoveringResult,
    GaussianMeasurementEnsemble,
    InconsistentMeasurementsError,
    SplitCertificate,
    TheoremPreconditionError,
    approx_covering_number,
    brute_posterior,
    delta_alpha_winf,
    validate_lemma1,
    validate_theorem1,
    validate_theorem2,
    verify_certificate,
    wasserstein_inf,
    wasserstein_q,
)


def _point(v):
    return FiniteDistribution(np.atleast_2d(np.asarray(v, dtype=float)), [1.0])


def _uniform(atoms):
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    return FiniteDistribution(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))


def _random_pair(rng, max_atoms=8, dim=3):
    def one():
        k = int(rng.integers(1, max_atoms + 1))
        atoms = 3.0 * rng.standard_normal((k, dim))
        probs = rng.random(k) + 0.05
        return FiniteDistribution(atoms, probs / probs.sum())

    return one(), one()


# ---------------------------------------------------------------------------
# W-infinity
# ---------------------------------------------------------------------------


def test_winf_point_masses():
    v = np.array([3.0, 4.0])
    assert wasserstein_inf(_point([0.0, 0.0]), _point(v)) == pytest.approx(5.0)


def test_winf_identical_distributions():
    rng = np.random.default_rng(0)
    mu, _ = _random_pair(rng)
    assert wasserstein_inf(mu, mu) == 0.0


def test_winf_two_point_example():
    mu = _uniform([0.0, 10.0])
    nu = _uniform([1.0, 9.0])
    assert wasserstein_inf(mu, nu) == pytest.approx(1.0, abs=1e-12)


def _winf_exhaustive(mu, nu):
    """Independent oracle: smallest radius whose bipartite pair graph admits
    a feasible fractional coupling, checked by LP over all radii."""
    from scipy.optimize import linprog

    d = np.linalg.norm(mu.atoms[:, None, :] - nu.atoms[None, :, :], axis=2)
    k, l = d.shape
    for r in np.unique(d):
        allowed = d <= r
        # variables f_ij >= 0 restricted to allowed pairs
        idx = np.transpose(np.nonzero(allowed))
        if idx.size == 0:
            continue
        n_var = idx.shape[0]
        a_eq = np.zeros((k + l, n_var))
        for col, (i, j) in enumerate(idx):
            a_eq[i, col] = 1.0
            a_eq[k + j, col] = 1.0
        b_eq = np.concatenate([mu.probs, nu.probs])
        res = linprog(
            np.zeros(n_var), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * n_var,
            method="highs",
        )
        if res.status == 0:
            return float(r)
    raise AssertionError("no feasible radius found")


def test_winf_matches_lp_oracle():
    rng = np.random.default_rng(1)
    for _ in range(15):
        mu, nu = _random_pair(rng, max_atoms=4, dim=2)
        assert wasserstein_inf(mu, nu) == pytest.approx(
            _winf_exhaustive(mu, nu), abs=1e-9
        )


# ---------------------------------------------------------------------------
# W-q
# ---------------------------------------------------------------------------


def test_wq_point_masses():
    v = np.array([1.0, 2.0, 2.0])
    for q in (1.0, 2.0, 3.0, 7.5):
        assert wasserstein_q(_point(np.zeros(3)), _point(v), q) == pytest.approx(3.0)


def test_wq_below_winf_and_monotone_in_q():
    rng = np.random.default_rng(2)
    for _ in range(50):
        mu, nu = _random_pair(rng)
        winf = wasserstein_inf(mu, nu)
        prev = -1.0
        for q in (1.0, 2.0, 4.0):
            wq = wasserstein_q(mu, nu, q)
            assert wq <= winf + 1e-9
            assert wq >= prev - 1e-9
            prev = wq


def test_wq_rejects_small_q():
    mu = _uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        wasserstein_q(mu, mu, 0.5)


def _wq_1d_quantile(mu, nu, q):
    """1-D W_q via the quantile-coupling formula (independent oracle)."""
    om = np.argsort(mu.atoms[:, 0])
    on = np.argsort(nu.atoms[:, 0])
    am, pm = mu.atoms[om, 0], mu.probs[om]
    an, pn = nu.atoms[on, 0], nu.probs[on]
    i = j = 0
    ri, rj = pm[0], pn[0]
    cost = 0.0
    while i < len(am) and j < len(an):
        f = min(ri, rj)
        cost += f * abs(am[i] - an[j]) ** q
        ri -= f
        rj -= f
        if ri <= 1e-15:
            i += 1
            ri = pm[i] if i < len(am) else 0.0
        if rj <= 1e-15:
            j += 1
            rj = pn[j] if j < len(an) else 0.0
    return cost ** (1.0 / q)


def test_wq_matches_quantile_oracle_in_1d():
    rng = np.random.default_rng(3)
    for _ in range(20):
        mu, nu = _random_pair(rng, max_atoms=6, dim=1)
        for q in (1.0, 2.0):
            assert wasserstein_q(mu, nu, q) == pytest.approx(
                _wq_1d_quantile(mu, nu, q), abs=1e-9
            )


def test_wq_two_point_counterexample_value():
    # mu = {0 w.p. 0.9, r w.p. 0.1}, nu = {eps0 w.p. 0.9, -r w.p. 0.1}:
    # the optimal plan routes 0.1 mass to -r and 0.1 mass from r, giving
    # W_q^q = 0.1 r^q + 0.8 eps0^q + 0.1 (r - eps0)^q ~ (2 delta)^(1/q) r.
    r, eps0, delta = 100.0, 0.1, 0.1
    mu = FiniteDistribution([[0.0], [r]], [1 - delta, delta])
    nu = FiniteDistribution([[eps0], [-r]], [1 - delta, delta])
    for q in (1.0, 2.0):
        expected = (
            delta * r**q + (1 - 2 * delta) * eps0**q + delta * (r - eps0) ** q
        ) ** (1.0 / q)
        got = wasserstein_q(mu, nu, q)
        assert got == pytest.approx(expected, rel=1e-10)
        assert got == pytest.approx(_wq_1d_quantile(mu, nu, q), rel=1e-10)
        # large compared with the r-free quantities, on the (2 delta)^(1/q) scale
        assert got >= r * delta ** (1.0 / q)
        assert got <= r * (2 * delta) ** (1.0 / q) + eps0


# ---------------------------------------------------------------------------
# (delta, alpha)-W-infinity
# ---------------------------------------------------------------------------


def test_delta_alpha_counterexample_stays_small():
    eps0, delta = 0.1, 0.1
    for r in (1e2, 1e4, 1e6):
        mu = FiniteDistribution([[0.0], [r]], [1 - delta, delta])
        nu = FiniteDistribution([[eps0], [-r]], [1 - delta, delta])
        value, cert = delta_alpha_winf(mu, nu, delta, delta)
        assert value == pytest.approx(eps0)
        assert verify_certificate(cert, mu, nu, delta, delta)


def test_delta_alpha_zero_collapses_to_winf():
    rng = np.random.default_rng(4)
    for _ in range(10):
        mu, nu = _random_pair(rng, max_atoms=5)
        value, cert = delta_alpha_winf(mu, nu, 0.0, 0.0)
        assert value == pytest.approx(wasserstein_inf(mu, nu), abs=1e-12)
        assert verify_certificate(cert, mu, nu, 0.0, 0.0)


def test_delta_alpha_identical_is_zero():
    rng = np.random.default_rng(5)
    mu, _ = _random_pair(rng)
    for delta, alpha in [(0.0, 0.0), (0.3, 0.0), (0.0, 0.5), (0.4, 0.4)]:
        value, cert = delta_alpha_winf(mu, mu, delta, alpha)
        assert value == 0.0
        assert verify_certificate(cert, mu, mu, delta, alpha)


def test_delta_alpha_monotone():
    rng = np.random.default_rng(6)
    grid = [0.0, 0.1, 0.3, 0.6]
    for _ in range(5):
        mu, nu = _random_pair(rng, max_atoms=5)
        prev = math.inf
        for delta in grid:
            value, _ = delta_alpha_winf(mu, nu, delta, 0.0)
            assert value <= prev + 1e-12
            prev = value
        prev = math.inf
        for alpha in grid:
            value, _ = delta_alpha_winf(mu, nu, 0.2, alpha)
            assert value <= prev + 1e-12
            prev = value


def test_delta_alpha_validation():
    mu = _uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        delta_alpha_winf(mu, mu, 1.0, 0.0)
    with pytest.raises(ValueError):
        delta_alpha_winf(mu, mu, 0.0, -0.1)


def test_certificate_tampering_detected():
    mu = _uniform([0.0, 10.0])
    nu = _uniform([1.0, 9.0])
    value, cert = delta_alpha_winf(mu, nu, 0.0, 0.0)
    assert verify_certificate(cert, mu, nu, 0.0, 0.0)
    shrunk = SplitCertificate(
        epsilon=cert.epsilon * 0.5,
        pairs=cert.pairs,
        mu_in_mass=cert.mu_in_mass,
        nu_in_mass=cert.nu_in_mass,
    )
    assert not verify_certificate(shrunk, mu, nu, 0.0, 0.0)
    half = SplitCertificate(
        epsilon=cert.epsilon,
        pairs=cert.pairs[:1],
        mu_in_mass=cert.mu_in_mass,
        nu_in_mass=cert.nu_in_mass,
    )
    assert not verify_certificate(half, mu, nu, 0.0, 0.0)


# ---------------------------------------------------------------------------
# covering numbers
# ---------------------------------------------------------------------------


def test_covering_single_atom():
    mu = _point([5.0])
    for eps, delta in [(0.1, 0.0), (2.0, 0.5), (0.01, 0.99)]:
        result = approx_covering_number(mu, eps, delta)
        assert result.count <= 1
        assert result.exact


def test_covering_two_point():
    eps = 1.0
    mu = _uniform([0.0, 3 * eps])
    assert approx_covering_number(mu, eps, 0.0).count == 2
    assert approx_covering_number(mu, eps, 0.5).count == 1


def test_covering_collinear_five():
    eps = 1.0
    atoms = np.arange(5, dtype=float) * 2.5 * eps
    mu = _uniform(atoms)
    r0 = approx_covering_number(mu, eps, 0.0)
    assert r0.count == 5 and r0.exact
    r2 = approx_covering_number(mu, eps, 0.2)
    assert r2.count == 4 and r2.exact


def test_covering_midpoints_matter():
    # Two atoms 2 eps apart: a ball at the midpoint covers both.
    eps = 1.0
    mu = _uniform([0.0, 2 * eps])
    assert approx_covering_number(mu, eps, 0.0).count == 1
    assert approx_covering_number(mu, eps, 0.0, include_midpoints=False).count == 2


def _covering_exhaustive(mu, eps, delta):
    """Try all center subsets in increasing size (independent oracle)."""
    centers = theory._candidate_centers(mu.atoms, True)
    d = np.linalg.norm(centers[:, None, :] - mu.atoms[None, :, :], axis=2)
    member = d <= eps * (1.0 + 1e-12) + 1e-12
    need = 1.0 - delta - 1e-12
    if need <= 0:
        return 0
    for k in range(1, mu.count + 1):
        for combo in itertools.combinations(range(centers.shape[0]), k):
            covered = np.zeros(mu.count, dtype=bool)
            for c in combo:
                covered |= member[c]
            if mu.probs[covered].sum() >= need:
                return k
    return mu.count


def test_covering_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        k = int(rng.integers(2, 7))
        atoms = 2.0 * rng.standard_normal((k, 2))
        probs = rng.random(k) + 0.1
        mu = FiniteDistribution(atoms, probs / probs.sum())
        eps = float(0.5 + rng.random())
        delta = float(rng.choice([0.0, 0.1, 0.3]))
        result = approx_covering_number(mu, eps, delta)
        assert result.exact
        assert result.count == _covering_exhaustive(mu, eps, delta)


def test_covering_greedy_beyond_twenty_atoms():
    rng = np.random.default_rng(8)
    atoms = rng.standard_normal((25, 2)) * 5
    mu = FiniteDistribution(atoms, np.full(25, 1.0 / 25))
    result = approx_covering_number(mu, 0.5, 0.0)
    assert not result.exact  # greedy upper bound is flagged
    assert 1 <= result.count <= 25


def test_covering_delta_one():
    mu = _uniform([0.0, 1.0])
    result = approx_covering_number(mu, 0.5, 1.0)
    assert result.count == 0


def test_covering_validation():
    mu = _uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        approx_covering_number(mu, 0.0, 0.0)
    with pytest.raises(ValueError):
        approx_covering_number(mu, 1.0, 1.5)


# ---------------------------------------------------------------------------
# brute posterior
# ---------------------------------------------------------------------------


def test_brute_posterior_likelihood_dominance():
    prior = _uniform([[0.0, 0.0], [1.0, 1.0]])
    a = np.eye(2)
    y = np.array([1.0, 1.0])
    post = brute_posterior(prior, a, y, sigma=0.01)
    assert post.probs[1] == pytest.approx(1.0, abs=1e-12)


def test_brute_posterior_zero_operator_returns_prior():
    prior = FiniteDistribution([[0.0], [2.0], [5.0]], [0.5, 0.3, 0.2])
    post = brute_posterior(prior, np.zeros((3, 1)), np.zeros(3), sigma=1.0)
    np.testing.assert_allclose(post.probs, prior.probs, atol=1e-14)


def test_brute_posterior_matches_extended_precision():
    atoms = np.array([[0.0, 0.0], [1.5, -0.5], [-1.0, 2.0]])
    probs = np.array([0.5, 0.3, 0.2])
    prior = FiniteDistribution(atoms, probs)
    a = np.array([[0.8, -0.2], [0.1, 1.1], [0.5, 0.4]])
    y = np.array([0.9, -0.1, 0.4])
    sigma, m = 0.7, 3
    post = brute_posterior(prior, a, y, sigma)  # m defaults to rows = 3
    with mpmath.workdps(60):
        weights = []
        for k in range(3):
            resid = y - a @ atoms[k]
            d2 = mpmath.mpf(0)
            for v in resid:
                d2 += mpmath.mpf(float(v)) ** 2
            weights.append(
                mpmath.mpf(float(probs[k]))
                * mpmath.e ** (-m * d2 / (2 * mpmath.mpf(sigma) ** 2))
            )
        z = sum(weights)
        expected = [float(w / z) for w in weights]
    np.testing.assert_allclose(post.probs, expected, atol=1e-14)


def test_brute_posterior_m_convention():
    prior = FiniteDistribution([[0.0], [1.0]], [0.5, 0.5])
    a = np.array([[1.0], [1.0]])  # two rows -> default m = 2
    y = np.array([0.9, 0.8])
    default = brute_posterior(prior, a, y, sigma=0.5)
    explicit = brute_posterior(prior, a, y, sigma=0.5, m=2)
    plain = brute_posterior(prior, a, y, sigma=0.5, m=1)
    np.testing.assert_allclose(default.probs, explicit.probs, atol=1e-15)
    assert abs(default.probs[1] - plain.probs[1]) > 1e-3


def test_brute_posterior_weights_sum_and_relabeling():
    rng = np.random.default_rng(9)
    atoms = rng.standard_normal((4, 3))
    probs = np.array([0.4, 0.3, 0.2, 0.1])
    prior = FiniteDistribution(atoms, probs)
    a = rng.standard_normal((5, 3))
    y = rng.standard_normal(5)
    post = brute_posterior(prior, a, y, sigma=0.8)
    assert abs(post.probs.sum() - 1.0) <= 1e-12
    perm = np.array([2, 0, 3, 1])
    shuffled = brute_posterior(
        FiniteDistribution(atoms[perm], probs[perm]), a, y, sigma=0.8
    )
    np.testing.assert_allclose(shuffled.probs, post.probs[perm], atol=1e-14)


def test_brute_posterior_inconsistent_measurements():
    prior = FiniteDistribution([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(InconsistentMeasurementsError):
        brute_posterior(prior, [[1.0]], np.array([1e200]), sigma=1.0)


def test_brute_posterior_validation():
    prior = FiniteDistribution([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        brute_posterior(prior, [[1.0]], np.array([0.0]), sigma=0.0)
    with pytest.raises(ValueError):
        brute_posterior(prior, [[1.0, 2.0]], np.array([0.0]), sigma=1.0)


def test_measurement_ensemble_statistics():
    ens = GaussianMeasurementEnsemble(m=25, n=10, sigma=2.0)
    rng = np.random.default_rng(10)
    a_vars, w_vars = [], []
    for _ in range(200):
        a, w = ens.draw(rng)
        assert a.shape == (25, 10)
        assert w.shape == (25,)
        a_vars.append(a.var())
        w_vars.append(w.var())
    assert np.mean(a_vars) == pytest.approx(1.0 / 25, rel=0.05)
    assert np.mean(w_vars) == pytest.approx(4.0 / 25, rel=0.1)
    with pytest.raises(ValueError):
        GaussianMeasurementEnsemble(m=0, n=1, sigma=1.0)


# ---------------------------------------------------------------------------
# theorem 2 harness
# ---------------------------------------------------------------------------


def test_theorem2_single_atom_prior():
    prior = _point([1.0, 2.0])
    report = validate_theorem2(prior, np.eye(2), 0.5, [0.5, 1.0], trials=200, seed=0)
    assert report.ok
    for entry in report.entries:
        assert entry.fail_alg == 0.0
        assert entry.fail_ps == 0.0


def test_theorem2_near_noiseless_invertible():
    prior = FiniteDistribution([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], [0.4, 0.3, 0.3])
    report = validate_theorem2(prior, np.eye(2), 1e-4, [0.5], trials=300, seed=1)
    assert report.ok
    for entry in report.entries:
        assert entry.fail_alg == 0.0
        assert entry.fail_ps == 0.0


def test_theorem2_scalar_five_atoms():
    # sigma tuned so the reference algorithm fails ~15% of the time.
    prior = FiniteDistribution([[0.0], [1.0], [2.0], [3.0], [4.0]], [0.2] * 5)
    report = validate_theorem2(
        prior, [[1.0]], 0.9, [0.5], trials=10000, seed=7, metrics=("l2",)
    )
    entry = report.entries[0]
    assert 0.10 <= entry.fail_alg <= 0.20
    assert entry.fail_ps <= 2 * entry.fail_alg + 3 * math.sqrt(
        entry.se_ps**2 + 4 * entry.se_alg**2
    )
    assert report.ok


def test_theorem2_report_serializes():
    prior = _uniform([[0.0, 0.0], [2.0, 1.0]])
    report = validate_theorem2(
        prior, np.eye(2), 0.5, [0.5], trials=50, seed=3, record_trials=True
    )
    payload = json.dumps(report.to_dict())
    assert "theorem2" in payload
    assert len(report.trial_records) == 50 * 2  # metrics x trials


def test_theorem2_validation():
    prior = _uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        validate_theorem2(prior, [[1.0]], 0.5, [0.5], trials=0)
    with pytest.raises(ValueError):
        validate_theorem2(prior, [[1.0]], 0.5, [-0.5], trials=10)


# ---------------------------------------------------------------------------
# theorem 1 harness
# ---------------------------------------------------------------------------


def test_theorem1_no_shift_case():
    mu = _uniform(np.eye(3) * 2.0)
    report = validate_theorem1(
        mu, mu, delta=0.0, alpha=0.0, eps=0.0, sigma=0.5,
        m_grid=(1, 4, 16), trials=300, seed=2, c_grid=(0.5, 1.0, 5.0),
    )
    assert report.divergence == 0.0
    assert report.ok
    assert report.curve_ok
    assert report.passing_c is not None
    curve = report.curves[report.passing_c]
    assert curve[-1] <= report.threshold


def test_theorem1_perturbed_support():
    # alpha = 0: nu is mu with every atom moved by at most eps.
    rng = np.random.default_rng(11)
    atoms = np.eye(4) * 3.0
    mu = _uniform(atoms)
    eps = 0.2
    shift = rng.standard_normal(atoms.shape)
    shift *= eps / np.linalg.norm(shift, axis=1, keepdims=True)
    nu = FiniteDistribution(atoms + 0.9 * shift, mu.probs)
    report = validate_theorem1(
        mu, nu, delta=0.0, alpha=0.0, eps=eps, sigma=0.5,
        m_grid=(1, 4, 16, 32), trials=300, seed=3, c_grid=(0.5, 1.0, 2.0, 5.0),
    )
    assert report.divergence <= eps
    assert report.ok


def test_theorem1_precondition_enforced():
    mu = _point([0.0, 0.0])
    nu = _point([10.0, 0.0])
    with pytest.raises(TheoremPreconditionError):
        validate_theorem1(
            mu, nu, delta=0.0, alpha=0.0, eps=0.1, sigma=0.5,
            m_grid=(1, 2), trials=50, seed=0,
        )


def test_theorem1_report_serializes():
    mu = _uniform(np.eye(2))
    report = validate_theorem1(
        mu, mu, delta=0.0, alpha=0.0, eps=0.0, sigma=0.5,
        m_grid=(1, 2), trials=50, seed=4, c_grid=(1.0,),
    )
    payload = json.dumps(report.to_dict())
    assert "theorem1" in payload
    assert report.cov_mu >= 1
    assert report.cov_nu >= 1


# ---------------------------------------------------------------------------
# lemma 1 harness
# ---------------------------------------------------------------------------


def test_lemma1_random_pairs_and_counterexample():
    report = validate_lemma1(trials=20, max_atoms=5, dim=2, q=2.0, delta=0.1, seed=5)
    assert report.ok
    assert len(report.pair_results) == 20
    for pair in report.pair_results:
        assert pair.divergence <= pair.bound + 1e-9
    rs = [entry.r for entry in report.counterexample]
    wqs = [entry.wq for entry in report.counterexample]
    assert rs == sorted(rs)
    assert all(b > a for a, b in zip(wqs, wqs[1:]))  # unbounded growth in r
    for entry in report.counterexample:
        assert entry.divergence <= 0.1 + 1e-12


def test_lemma1_report_serializes():
    report = validate_lemma1(trials=3, max_atoms=4, dim=2, seed=6)
    payload = json.dumps(report.to_dict())
    assert "lemma1" in payload
