import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from privremap import analytic as A
from privremap.estimators import (
    MU,
    MU_CHECK,
    X,
    Z,
    GaussianJoint,
    SingularObservation,
    adversary_imperfect,
    adversary_perfect,
    adversary_randomized,
    branch_plan,
    conditional_variances,
    gaussian_condition,
    observation_joint,
    remap,
)
from privremap.kernels import get_backend
from privremap.model import Mechanism, ModelParams

from conftest import random_params


def linear_gains(params, released):
    """Posterior-mean rows for (X, mu) as linear maps of (z, mu_check),
    read off gaussian_condition at the basis vectors."""
    joint = observation_joint(params, released)
    g = np.empty((2, 2))
    for j, obs in enumerate(([1.0, 0.0], [0.0, 1.0])):
        mean, _ = gaussian_condition(joint, [Z, MU_CHECK], obs)
        g[:, j] = mean[[X, MU]]
    return g


def draw_worlds(params, n, seed):
    rng = np.random.default_rng(seed)
    sd = np.sqrt([params.sigma2_mu, params.sigma2_s, params.sigma2_w, params.sigma2_e])
    mu, s, w, e = rng.standard_normal((4, n)) * sd[:, None]
    x = mu + s
    y = x + w
    b = params.sigma2_s / (params.sigma2_s + params.sigma2_w)
    yr = mu + b * (y - mu)
    return dict(mu=mu, x=x, y=y, mc=mu + e, yr=yr, rng=rng)


def within(sample, target, k=3.0):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - target) <= k * se


class TestGaussianCondition:
    def test_self_observation(self):
        mean, cov = gaussian_condition(GaussianJoint([0.0], [[2.0]]), [0], [1.7])
        assert mean[0] == 1.7 and cov[0, 0] == 0

    def test_independent_pair(self):
        joint = GaussianJoint([1.0, -2.0], [[3.0, 0.0], [0.0, 5.0]])
        mean, cov = gaussian_condition(joint, [0], [10.0])
        assert mean[1] == -2.0 and cov[1, 1] == 5.0

    @pytest.mark.parametrize("mu, s, w, y", [(0.3, 1.0, 1.0, 2.0), (-1.0, 2.5, 0.4, 0.7), (4.0, 0.2, 3.0, -1.0)])
    def test_remap_and_perfect_mse(self, mu, s, w, y):
        joint = GaussianJoint([mu, mu], [[s, s], [s, s + w]])
        mean, cov = gaussian_condition(joint, [1], [y])
        params = ModelParams(1.0, s, 1.0, w)
        assert mean[0] == pytest.approx((w * mu + s * y) / (s + w), rel=1e-12)
        assert cov[0, 0] == pytest.approx(A.privacy_loc_perfect_no_remap(params), rel=1e-12)

    def test_conditional_variance_never_grows(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.normal(size=(4, 4))
            cov = a @ a.T
            _, post = gaussian_condition(GaussianJoint(np.zeros(4), cov), [2, 3], rng.normal(size=2))
            assert np.all(np.diag(post) <= np.diag(cov) + 1e-12)

    def test_singular_consistent_and_inconsistent(self):
        # second coordinate duplicates the first
        joint = GaussianJoint([0.0, 0.0, 0.0], [[1.0, 1.0, 0.5], [1.0, 1.0, 0.5], [0.5, 0.5, 1.0]])
        mean, cov = gaussian_condition(joint, [0, 1], [0.8, 0.8])
        assert mean[2] == pytest.approx(0.4) and cov[2, 2] == pytest.approx(0.75)
        with pytest.raises(SingularObservation):
            gaussian_condition(joint, [0, 1], [0.8, -0.8])

    def test_rejects_bad_joint(self):
        with pytest.raises(ValueError):
            GaussianJoint([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(ValueError):
            GaussianJoint([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


class TestRemap:
    def test_examples(self):
        assert remap(1.7, 0.2, ModelParams(1, 1, 1, 0)) == 1.7
        assert remap(1.0, 3.0, ModelParams(1, 2.0, 1, 2.0)) == pytest.approx(2.0)
        assert remap(0.4, 0.4, ModelParams(1, 0.3, 1, 5.0)) == pytest.approx(0.4, rel=1e-15)

    def test_perfect(self):
        p = ModelParams(1, 1, 1, 0)
        est = adversary_perfect(1.5, 0.5, p)
        assert est.x_hat == 1.5 and est.mu_hat == 0.5 and est.head_posterior is None

    def test_perfect_mse_monte_carlo(self, unit):
        d = draw_worlds(unit, 1_000_000, 1)
        err = (remap(d["y"], d["mu"], unit) - d["x"]) ** 2
        assert within(err, A.privacy_loc_perfect_no_remap(unit))


class TestImperfect:
    def test_remap_release_is_own_posterior_mean(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            p = random_params(rng)
            z, mc = rng.normal(scale=3.0, size=2)
            assert abs(adversary_imperfect(z, mc, p, Mechanism.REMAP).x_hat - z) <= 1e-12 * max(1.0, abs(z))

    def test_exact_prior(self):
        p = ModelParams(1.3, 0.7, 0.0, 2.0)
        est = adversary_imperfect(0.9, -0.4, p, Mechanism.NO_REMAP)
        assert est.mu_hat == pytest.approx(-0.4, abs=1e-12)

    def test_no_remap_monte_carlo(self, unit):
        d = draw_worlds(unit, 1_000_000, 2)
        g = linear_gains(unit, Mechanism.NO_REMAP)
        x_hat = g[0, 0] * d["y"] + g[0, 1] * d["mc"]
        mu_hat = g[1, 0] * d["y"] + g[1, 1] * d["mc"]
        assert within((mu_hat - d["mu"]) ** 2, 0.4)
        assert within((x_hat - d["x"]) ** 2, 0.6)
        # scalar API agrees with the gains
        est = adversary_imperfect(d["y"][0], d["mc"][0], unit, Mechanism.NO_REMAP)
        assert est.x_hat == pytest.approx(x_hat[0], rel=1e-12)


def test_bridge_to_closed_forms():
    rng = np.random.default_rng(100)
    for _ in range(100):
        p = random_params(rng)
        vx_nr, vm_nr = conditional_variances(p, Mechanism.NO_REMAP)
        vx_r, vm_r = conditional_variances(p, Mechanism.REMAP)
        vx_perfect, _ = conditional_variances(p.replace(sigma2_e=0.0), Mechanism.NO_REMAP)
        assert vx_perfect == pytest.approx(A.privacy_loc_perfect_no_remap(p), rel=1e-10)
        assert vm_nr == pytest.approx(A.privacy_model_imperfect_no_remap(p), rel=1e-10)
        assert vx_nr == pytest.approx(A.privacy_loc_imperfect_no_remap(p), rel=1e-10)
        assert vm_r == pytest.approx(A.privacy_model_imperfect_remap(p), rel=1e-10)
        assert vx_r == pytest.approx(A.privacy_loc_imperfect_remap(p), rel=1e-10)


class TestRandomized:
    def test_endpoints(self):
        rng = np.random.default_rng(4)
        p = random_params(rng)
        for z, mc in rng.normal(size=(20, 2)):
            one = adversary_randomized(z, mc, p.replace(p_h=1.0))
            ref = adversary_imperfect(z, mc, p, Mechanism.REMAP)
            assert (one.x_hat, one.mu_hat, one.head_posterior) == (ref.x_hat, ref.mu_hat, 1.0)
            zero = adversary_randomized(z, mc, p.replace(p_h=0.0))
            ref = adversary_imperfect(z, mc, p, Mechanism.NO_REMAP)
            assert (zero.x_hat, zero.mu_hat, zero.head_posterior) == (ref.x_hat, ref.mu_hat, 0.0)

    def test_far_tail_weights_do_not_underflow(self):
        p = ModelParams(1, 1, 1, 4.0, 0.5)
        est = adversary_randomized(80.0, 0.0, p)
        assert est.head_posterior == 0.0
        assert math.isfinite(est.x_hat) and math.isfinite(est.mu_hat)

    def test_lower_dimensional_branch_wins(self):
        # sigma2_s = 0 and sigma2_e = 0: the remapped release equals mu_check exactly
        p = ModelParams(1.0, 0.0, 0.0, 1.0, 0.3)
        hit = adversary_randomized(0.7, 0.7, p)
        miss = adversary_randomized(1.1, 0.7, p)
        assert hit.head_posterior == 1.0 and hit.x_hat == pytest.approx(0.7)
        assert miss.head_posterior == 0.0

    def test_tie_returns_prior(self):
        # sigma2_w = 0 makes both branches identical
        p = ModelParams(1.0, 2.0, 0.5, 0.0, 0.37)
        assert adversary_randomized(0.3, -0.2, p).head_posterior == 0.37

    @pytest.mark.parametrize("p_h", [0.1, 0.5, 0.9])
    def test_kernel_estimate_matches_scalar(self, backend, p_h):
        rng = np.random.default_rng(5)
        kern = get_backend(backend)
        for _ in range(5):
            p = random_params(rng, p_h)
            zs, mcs = rng.normal(scale=2.0, size=(2, 200))
            w, xh, mh = kern.estimate(zs, mcs, p_h, branch_plan(p, "Remap"), branch_plan(p, "NoRemap"))
            for i in range(zs.size):
                ref = adversary_randomized(zs[i], mcs[i], p)
                assert w[i] == pytest.approx(ref.head_posterior, rel=1e-9, abs=1e-12)
                assert xh[i] == pytest.approx(ref.x_hat, rel=1e-9, abs=1e-12)
                assert mh[i] == pytest.approx(ref.mu_hat, rel=1e-9, abs=1e-12)


def mixture_model_mse_quadrature(p, n_nodes=60):
    """MSE of the Bayes mixture estimate of mu by Gauss-Hermite quadrature.

    Built only from scipy densities and linear solves, independent of the
    package's estimator code. Uses MSE = Var(mu) - E[mu_hat^2]."""
    m, s, e, w = p.sigma2_mu, p.sigma2_s, p.sigma2_e, p.sigma2_w
    b = s / (s + w)
    c_h = np.array([[m + b * s, m], [m, m + e]])
    c_t = np.array([[m + s + w, m], [m, m + e]])
    g_h = np.linalg.solve(c_h, [m, m])
    g_t = np.linalg.solve(c_t, [m, m])
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    weights = weights / weights.sum()
    u, v = np.meshgrid(nodes, nodes)
    ww = np.outer(weights, weights).ravel()
    second = 0.0
    for cov, prob in ((c_h, p.p_h), (c_t, 1 - p.p_h)):
        obs = (np.linalg.cholesky(cov) @ np.stack([u.ravel(), v.ravel()])).T
        d = math.log(p.p_h / (1 - p.p_h)) + multivariate_normal(cov=c_h).logpdf(obs) - multivariate_normal(cov=c_t).logpdf(obs)
        h = 1 / (1 + np.exp(-d))
        est = h * (obs @ g_h) + (1 - h) * (obs @ g_t)
        second += prob * np.sum(ww * est**2)
    return m - second


N_MIXTURE = 1_000_000


@pytest.fixture(scope="module")
def sample():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.5)
    d = draw_worlds(p, N_MIXTURE, 9)
    head = d["rng"].random(N_MIXTURE) < p.p_h
    z = np.where(head, d["yr"], d["y"])
    kern = get_backend("numpy")
    w, xh, mh = kern.estimate(z, d["mc"], p.p_h, branch_plan(p, "Remap"), branch_plan(p, "NoRemap"))
    return p, d, z, w, xh, mh


class TestRandomizedMonteCarlo:
    def test_model_mse_between_pure_mechanisms(self, sample):
        p, d, z, w, xh, mh = sample
        err = (mh - d["mu"]) ** 2
        se = err.std(ddof=1) / math.sqrt(err.size)
        assert 0.25 + 3 * se < err.mean() < 0.4 - 3 * se

    def test_model_mse_matches_quadrature(self, sample):
        p, d, z, w, xh, mh = sample
        assert within((mh - d["mu"]) ** 2, mixture_model_mse_quadrature(p))

    def test_orthogonality(self, sample):
        p, d, z, w, xh, mh = sample
        n = z.size
        for resid in (d["x"] - xh, d["mu"] - mh):
            for obs in (z, d["mc"]):
                assert abs(np.corrcoef(resid, obs)[0, 1]) <= 4 / math.sqrt(n)

    def test_calibration(self, sample):
        p, d, z, w, xh, mh = sample
        assert np.all((w >= 0) & (w <= 1))
        assert within(w, p.p_h)

    def test_never_worse_than_friend(self, sample):
        p, d, z, w, xh, mh = sample
        diff = (xh - d["x"]) ** 2 - (z - d["x"]) ** 2
        assert diff.mean() <= 3 * diff.std(ddof=1) / math.sqrt(diff.size)


@pytest.mark.parametrize("mech", [Mechanism.NO_REMAP, Mechanism.REMAP])
def test_orthogonality_pure(unit, mech):
    n = 1_000_000
    d = draw_worlds(unit, n, 12)
    z = d["y"] if mech is Mechanism.NO_REMAP else d["yr"]
    g = linear_gains(unit, mech)
    xh = g[0, 0] * z + g[0, 1] * d["mc"]
    mh = g[1, 0] * z + g[1, 1] * d["mc"]
    for resid in (d["x"] - xh, d["mu"] - mh):
        for obs in (z, d["mc"]):
            assert abs(np.corrcoef(resid, obs)[0, 1]) <= 4 / math.sqrt(n)
    friend = (z - d["x"]) ** 2
    adv = (xh - d["x"]) ** 2
    diff = adv - friend
    assert diff.mean() <= 3 * diff.std(ddof=1) / math.sqrt(n) + 1e-15
