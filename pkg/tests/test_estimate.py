"""Likelihood pieces and the Newton estimators."""
import math

import numpy as np
import pytest

from gstable import estimate as est
from gstable import simulate as sim
from gstable.convolution import Theta, p_density
from gstable.errors import OutOfRegime


@pytest.fixture(scope="module")
def levy_path():
    return sim.sample_levy_path(Theta(1.0, 1.0, 1.5), 2000, sim.replication_rng(100, 0))


@pytest.fixture(scope="module")
def sde_path():
    tau = sim.TemperingSpec("truncation", eta=1.0)
    return sim.sample_sde_path(sim.default_sde_model(), Theta(1.0, 0.5, 1.2), tau,
                               2000, 8, sim.replication_rng(101, 0))


# ---------------------------------------------------------------------------
# loglik / score / hessian
# ---------------------------------------------------------------------------

def test_loglik_permutation_invariance(levy_path):
    th = Theta(1.0, 1.0, 1.4)
    inc = levy_path.increments.copy()
    a = est.loglik_levy(sim.PathSample.from_increments(inc), th)
    rng = np.random.default_rng(0)
    rng.shuffle(inc)
    b = est.loglik_levy(sim.PathSample.from_increments(inc), th)
    assert abs(a - b) < 1e-8 * abs(a)


def test_loglik_is_sum_of_log_densities(levy_path):
    # the log-likelihood is the plain sum of per-increment ln p (a single
    # observation being the one-term case); batch vs pointwise density route
    th = Theta(1.0, 1.0, 1.4)
    sub = sim.PathSample.from_increments(levy_path.increments[:400])
    batch = est.loglik_levy(sub, th)
    direct = float(np.sum(np.log(p_density(sub.increments, th, sub.n))))
    assert abs(batch - direct) < 1e-5 * abs(direct)
    one = sim.PathSample.from_increments(levy_path.increments[:1])
    assert np.isfinite(est.loglik_levy(one, th))


def test_loglik_gaussian_limit():
    # delta -> 0: Gaussian log-likelihood, 1e-3 per term
    n = 500
    rng = sim.replication_rng(102, 0)
    inc = 1.2 * rng.standard_normal(n) / math.sqrt(n)
    data = sim.PathSample.from_increments(inc)
    th = Theta(1.2, 1e-7, 1.5)
    got = est.loglik_levy(data, th)
    want = float(np.sum(-0.5 * np.log(2 * math.pi * 1.2 ** 2 / n) - inc ** 2 * n / (2 * 1.2 ** 2)))
    assert abs(got - want) / n < 1e-3


def test_score_hessian_vs_fd(levy_path):
    th = Theta(1.0, 1.0, 1.45)
    G = est.score_levy(levy_path, th)
    J = est.hessian_levy(levy_path, th)
    assert np.array_equal(J, J.T)
    eps = (1e-5, 1e-5, 1e-4)
    for i in range(3):
        tp, tm = th.as_array(), th.as_array()
        tp[i] += eps[i]
        tm[i] -= eps[i]
        fd = (est.loglik_levy(levy_path, Theta(*tp))
              - est.loglik_levy(levy_path, Theta(*tm))) / (2 * eps[i])
        assert abs(G[i] / fd - 1.0) < 1e-3
        fdJ = (est.score_levy(levy_path, Theta(*tp))
               - est.score_levy(levy_path, Theta(*tm))) / (2 * eps[i])
        assert np.max(np.abs(J[i] / fdJ - 1.0)) < 1e-3


def test_quasi_score_constant_coefficients_reduce(levy_path):
    th = Theta(1.0, 1.0, 1.45)
    a = est.quasi_score_sde(levy_path, sim.constant_sde_model(), th)
    b = est.score_levy(levy_path, th)
    assert np.max(np.abs(a - b)) < 1e-10


def test_quasi_score_vs_fd(sde_path):
    th = Theta(1.0, 0.5, 1.2)
    model = sim.default_sde_model()
    G, J = est.quasi_score_sde(sde_path, model, th, with_jacobian=True)
    prob = est._Problem(sde_path, model)
    eps = (1e-5, 1e-6, 1e-5)
    for i in range(3):
        tp, tm = th.as_array(), th.as_array()
        tp[i] += eps[i]
        tm[i] -= eps[i]
        fd = (prob.loglik(Theta(*tp)) - prob.loglik(Theta(*tm))) / (2 * eps[i])
        assert abs(G[i] / fd - 1.0) < 1e-3


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def test_mle_stationary_start_zero_iterations(levy_path):
    res = est.mle_levy(levy_path, Theta(1.05, 0.9, 1.45))
    assert res.converged
    res2 = est.mle_levy(levy_path, res.theta_hat)
    assert res2.iterations == 0
    assert res2.converged
    assert np.array_equal(res2.theta_hat.as_array(), res.theta_hat.as_array())


def test_mle_cov_hat_psd(levy_path):
    res = est.mle_levy(levy_path, Theta(1.05, 0.9, 1.45))
    assert np.array_equal(res.cov_hat, res.cov_hat.T)
    assert np.all(np.linalg.eigvalsh(res.cov_hat) >= 0.0)
    assert res.score_norm <= 1e-6


def test_mle_equivariance(levy_path):
    # y -> lam y with sigma -> lam sigma, delta -> lam delta maps theta_hat
    lam = 2.0
    res1 = est.mle_levy(levy_path, Theta(1.05, 0.9, 1.45))
    scaled = sim.PathSample.from_increments(lam * levy_path.increments)
    res2 = est.mle_levy(scaled, Theta(lam * 1.05, lam * 0.9, 1.45))
    got = res2.theta_hat.as_array()
    want = res1.theta_hat.as_array() * np.array([lam, lam, 1.0])
    assert np.max(np.abs(got / want - 1.0)) < 1e-5


def test_mle_fixed_parameter_masks(levy_path):
    res = est.mle_levy(levy_path, Theta(1.0, 1.0, 1.5), fix={"delta": 1.0})
    assert res.theta_hat.delta == 1.0
    assert res.converged
    res2 = est.mle_levy(levy_path, Theta(1.0, 1.0, 1.5), fix={"alpha": 1.5})
    assert res2.theta_hat.alpha == 1.5


def test_qmle_degenerates_to_mle(levy_path):
    init = Theta(1.05, 0.95, 1.45)
    r_sde = est.qmle_sde(levy_path, sim.constant_sde_model(), init)
    r_lev = est.mle_levy(levy_path, init)
    assert np.max(np.abs(r_sde.theta_hat.as_array() - r_lev.theta_hat.as_array())) < 1e-8


def test_qmle_runs_on_default_model(sde_path):
    model = sim.default_sde_model()
    res = est.qmle_sde(sde_path, model, Theta(1.05, 0.55, 1.25))
    assert res.converged
    assert res.info_used.kind == "sde"
    d = np.abs(res.theta_hat.as_array() - np.array([1.0, 0.5, 1.2]))
    assert d[0] < 0.3 and d[2] < 0.45     # loose sanity at n=2000


def test_initial_theta_sigma(levy_path):
    init = est.initial_theta(levy_path)
    assert abs(init.sigma - 1.0) < 0.2


def test_loglik_out_of_regime_propagates(levy_path):
    # absurd alpha at tiny effective n would push w beyond the evaluable range
    data = sim.PathSample.from_increments(levy_path.increments[:20])
    with pytest.raises(OutOfRegime):
        est.loglik_levy(data, Theta(1e-6, 1e6, 1.9))


# ---------------------------------------------------------------------------
# increment files
# ---------------------------------------------------------------------------

def test_increment_file_roundtrip(tmp_path, levy_path):
    f = tmp_path / "inc.txt"
    est.write_increments(f, levy_path.increments)
    back = est.read_increments(f)
    assert back.n == levy_path.n
    assert np.array_equal(back.increments, levy_path.increments)


def test_increment_file_validation(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("nonsense 3\n1.0\n")
    with pytest.raises(ValueError):
        est.read_increments(f)
    f.write_text("n 3\n1.0\n2.0\n")
    with pytest.raises(ValueError):
        est.read_increments(f)
