"""Likelihood machinery and estimators.

Maximum likelihood for the Levy model and quasi-maximum-likelihood for the
jump SDE share one backend: per observation the log-density derivatives are
ratios of the convolution family evaluated at (sqrt(n) dX / a_i, w_i) with
a_i = a(X_i, sigma) and w_i = n^{1/2-1/alpha} delta c(X_i) / a_i.  A spline
workspace (FamilyWorkspace) is rebuilt whenever theta moves; the Newton
iteration runs in rate-normalized coordinates h = u_n^{-1} dtheta, where the
system is O(1)-conditioned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import info_levy, info_sde, rate_matrix
from .convolution import (ALPHA_MAX, ALPHA_MIN, SCALE_MAX, SCALE_MIN,
                          FamilyWorkspace, Theta, W_EVAL_MAX, grad_from_ratios,
                          hess_from_ratios)
from .errors import OutOfRegime, SingularNormalizedHessian
from .simulate import PathSample, SdeModel, constant_sde_model

_PHI3 = math.exp(-4.5) / math.sqrt(2.0 * math.pi)
_TRUNC_CORR = 1.0 - 6.0 * _PHI3 - 2.0 * 0.0013498980316300933  # E[X^2; |X|<=3sd]/var


@dataclass
class EstimationResult:
    theta_hat: Theta
    iterations: int
    converged: bool
    score_norm: float
    cov_hat: np.ndarray          # covariance estimate of u_n-normalized error
    info_used: object            # InfoMatrix
    message: str = ""

    def theta_cov(self, n: int) -> np.ndarray:
        """Covariance of theta_hat itself: u_n cov_hat u_n^T at theta_hat."""
        u = rate_matrix(self.theta_hat, n).M
        return u @ self.cov_hat @ u.T


class _Problem:
    """Shared evaluation backend for Levy MLE and SDE QMLE."""

    def __init__(self, data: PathSample, model: SdeModel | None):
        self.data = data
        self.n = data.n
        self.dx = data.increments
        self.model = model
        self.x_left = data.values[:-1]
        self.rt_n = math.sqrt(self.n)
        self._cache_key = None
        self._ws = None

    def _slots(self, theta: Theta):
        if self.model is None:
            a = np.full_like(self.dx, theta.sigma)
            c = np.ones_like(self.dx)
            da = np.ones_like(self.dx)
            d2a = np.zeros_like(self.dx)
        else:
            a = np.asarray(self.model.a(self.x_left, theta.sigma), dtype=float)
            c = np.asarray(self.model.c(self.x_left), dtype=float)
            da = np.asarray(self.model.da_dsigma(self.x_left, theta.sigma), dtype=float)
            d2a = np.asarray(self.model.d2a_dsigma2(self.x_left, theta.sigma), dtype=float)
        ytil = self.rt_n * self.dx / a
        w = self.n ** (0.5 - 1.0 / theta.alpha) * theta.delta * c / a
        return a, c, da, d2a, ytil, w

    def _workspace(self, theta: Theta, w: np.ndarray, hessian: bool) -> FamilyWorkspace:
        wmin, wmax = float(w.min()), float(w.max())
        if wmax > W_EVAL_MAX or wmin <= 0.0:
            raise OutOfRegime(f"w range [{wmin:g}, {wmax:g}] not evaluable", w=wmax)
        if wmax / wmin < 1.0 + 1e-10:
            levels = np.array([wmin])
        else:
            levels = np.geomspace(wmin * 0.999, wmax * 1.001, 8)
        key = (theta.alpha, levels.size, levels[0], levels[-1], hessian)
        if key != self._cache_key:
            self._ws = FamilyWorkspace(theta.alpha, levels, hessian=hessian)
            self._cache_key = key
        return self._ws

    def loglik(self, theta: Theta) -> float:
        a, _, _, _, ytil, w = self._slots(theta)
        ws = self._workspace(theta, w, hessian=False)
        q = ws.query(ytil, w)
        return float(np.sum(0.5 * math.log(self.n) - np.log(a) + q["logf"]))

    def score(self, theta: Theta) -> np.ndarray:
        a, c, da, _, ytil, w = self._slots(theta)
        ws = self._workspace(theta, w, hessian=False)
        q = ws.query(ytil, w)
        gs, gd, ga = grad_from_ratios(q, a, theta.delta * c, theta.alpha, self.n)
        return np.array([np.sum(da * gs), np.sum(c * gd), np.sum(ga)])

    def score_hess(self, theta: Theta):
        a, c, da, d2a, ytil, w = self._slots(theta)
        ws = self._workspace(theta, w, hessian=True)
        q = ws.query(ytil, w)
        dslot = theta.delta * c
        gs, gd, ga = grad_from_ratios(q, a, dslot, theta.alpha, self.n)
        G = np.array([np.sum(da * gs), np.sum(c * gd), np.sum(ga)])
        hss, hsd, hsa, hdd, hda, haa = hess_from_ratios(q, a, dslot, theta.alpha, self.n)
        J = np.empty((3, 3))
        J[0, 0] = np.sum(da ** 2 * hss + d2a * gs)
        J[0, 1] = J[1, 0] = np.sum(da * c * hsd)
        J[0, 2] = J[2, 0] = np.sum(da * hsa)
        J[1, 1] = np.sum(c ** 2 * hdd)
        J[1, 2] = J[2, 1] = np.sum(c * hda)
        J[2, 2] = np.sum(haa)
        return G, J


# ---------------------------------------------------------------------------
# spec surface: Levy likelihood pieces
# ---------------------------------------------------------------------------

def loglik_levy(data: PathSample, theta: Theta) -> float:
    return _Problem(data, None).loglik(theta)


def score_levy(data: PathSample, theta: Theta) -> np.ndarray:
    return _Problem(data, None).score(theta)


def hessian_levy(data: PathSample, theta: Theta) -> np.ndarray:
    return _Problem(data, None).score_hess(theta)[1]


def quasi_score_sde(data: PathSample, model: SdeModel, theta: Theta,
                    with_jacobian: bool = False):
    prob = _Problem(data, model)
    if with_jacobian:
        return prob.score_hess(theta)
    return prob.score(theta)


# ---------------------------------------------------------------------------
# Newton solver in normalized coordinates
# ---------------------------------------------------------------------------

_FREE_SETS = {
    (True, True, True): None,
    (True, False, True): "delta_known",
    (True, True, False): "alpha_known",
}


def _sub_rate(theta: Theta, n: int, free: np.ndarray) -> np.ndarray:
    """Rate matrix restricted to the free coordinates (known-parameter masks
    use the corresponding reduced rates)."""
    full = rate_matrix(theta, n).M
    variant = _FREE_SETS.get(tuple(bool(b) for b in free), "subblock")
    ln_n = math.log(n)
    r = (ln_n / n) ** (theta.alpha / 4.0)
    if variant is None:
        return full
    if variant == "delta_known":
        return np.diag([n ** -0.5, r / ln_n])
    if variant == "alpha_known":
        return np.diag([n ** -0.5, r])
    idx = np.nonzero(free)[0]
    return full[np.ix_(idx, idx)]


def _project(vec: np.ndarray) -> Theta:
    return Theta(float(np.clip(vec[0], SCALE_MIN, SCALE_MAX)),
                 float(np.clip(vec[1], SCALE_MIN, SCALE_MAX)),
                 float(np.clip(vec[2], ALPHA_MIN, ALPHA_MAX)))


def _newton(prob: _Problem, theta_init: Theta, tol: float, max_iter: int,
            fix: dict | None = None) -> EstimationResult:
    n = prob.n
    free = np.array([True, True, True])
    fix = fix or {}
    theta = theta_init.as_array().copy()
    for name, idx in (("sigma", 0), ("delta", 1), ("alpha", 2)):
        if name in fix:
            theta[idx] = fix[name]
            free[idx] = False
    th = _project(theta)
    idx_free = np.nonzero(free)[0]

    def safe_loglik(t: Theta) -> float:
        try:
            return prob.loglik(t)
        except (OutOfRegime, FloatingPointError):
            return -math.inf

    ll = safe_loglik(th)
    converged = False
    it = 0
    score_norm = math.inf
    message = ""
    polish_at = max(1e-2, 10.0 * tol)   # spline jitter in ll ~ 1e-5; below this
    best = (math.inf, th)               # score, iterate
    worse_runs = 0
    for it in range(max_iter + 1):
        try:
            G, J = prob.score_hess(th)
        except OutOfRegime as exc:
            message = f"score undefined: {exc}"
            break
        u = _sub_rate(th, n, free)
        gn = u.T @ G[idx_free]
        score_norm = float(np.linalg.norm(gn))
        if score_norm < best[0]:
            best = (score_norm, th)
            worse_runs = 0
        else:
            worse_runs += 1
        if score_norm <= tol:
            converged = True
            break
        if it == max_iter or worse_runs >= 5:
            break
        A = u.T @ J[np.ix_(idx_free, idx_free)] @ u
        A = 0.5 * (A + A.T)
        if np.linalg.cond(A) > 1e12:
            raise SingularNormalizedHessian(f"normalized Hessian condition {np.linalg.cond(A):.2e}")
        # Newton step, Levenberg-damped until it is an ascent direction (the
        # Hessian need not be negative definite far from the optimum)
        lam = 0.0
        scaleA = float(np.linalg.norm(A))
        for _ in range(12):
            try:
                h = np.linalg.solve(A - lam * np.eye(A.shape[0]), -gn)
            except np.linalg.LinAlgError:
                h = gn.copy()
                break
            if gn @ h > 1e-12 * np.linalg.norm(gn) * np.linalg.norm(h):
                break
            lam = max(2.0 * scaleA, 4.0 * lam) if lam else max(scaleA, 1e-8)
        else:
            h = gn.copy()
        step = u @ h
        if score_norm <= polish_at:
            # near the optimum the expected gain is below the workspace
            # rebuild jitter; take Newton steps under score monitoring instead,
            # halving if the normalized score grows
            t = 1.0
            for _ in range(8):
                cand = th.as_array()
                cand[idx_free] = cand[idx_free] + t * step
                th_new = _project(cand)
                try:
                    gn_new = _sub_rate(th_new, n, free).T @ prob.score(th_new)[idx_free]
                    if np.linalg.norm(gn_new) < score_norm:
                        break
                except OutOfRegime:
                    pass
                t *= 0.5
            th = th_new
            ll = safe_loglik(th)
            continue
        t = 1.0
        improved = False
        for _ in range(30):
            cand = th.as_array()
            cand[idx_free] = cand[idx_free] + t * step
            th_new = _project(cand)
            ll_new = safe_loglik(th_new)
            if ll_new > ll - 1e-12:
                th, ll = th_new, ll_new
                improved = True
                break
            t *= 0.5
        if not improved:
            message = "line search stalled; polishing on score"
            th_arr = th.as_array()
            th_arr[idx_free] = th_arr[idx_free] + step
            th = _project(th_arr)
            ll = safe_loglik(th)
    if not converged and best[0] < score_norm:
        score_norm, th = best

    info = (info_levy(th) if prob.model is None
            else info_sde(th, prob.data, prob.model))
    # covariance of the u_n-normalized error from the observed normalized
    # information -(u' J u); it tracks the finite-n spread much better than
    # the limit information at moderate n, and agrees with it asymptotically
    cov = None
    try:
        _, Jf = prob.score_hess(th)
        uf = _sub_rate(th, n, free)
        A_obs = -(uf.T @ Jf[np.ix_(idx_free, idx_free)] @ uf)
        A_obs = 0.5 * (A_obs + A_obs.T)
        if np.all(np.linalg.eigvalsh(A_obs) > 0.0):
            cov_free = np.linalg.inv(A_obs)
            cov = np.zeros((3, 3))
            cov[np.ix_(idx_free, idx_free)] = 0.5 * (cov_free + cov_free.T)
    except (OutOfRegime, np.linalg.LinAlgError):
        cov = None
    if cov is None:
        try:
            cov = np.linalg.inv(info.M)
            cov = 0.5 * (cov + cov.T)
        except np.linalg.LinAlgError:
            cov = np.full((3, 3), np.nan)
    return EstimationResult(theta_hat=th, iterations=it, converged=converged,
                            score_norm=score_norm, cov_hat=cov, info_used=info,
                            message=message or ("ok" if converged else "max_iter reached"))


def mle_levy(data: PathSample, theta_init: Theta, tol: float = 1e-6,
             max_iter: int = 50, fix: dict | None = None) -> EstimationResult:
    """Damped Newton MLE for the Levy model in normalized coordinates."""
    return _newton(_Problem(data, None), theta_init, tol, max_iter, fix)


def qmle_sde(data: PathSample, model: SdeModel, theta_init: Theta, tol: float = 1e-6,
             max_iter: int = 50, fix: dict | None = None) -> EstimationResult:
    """Quasi-likelihood estimator for the SDE; same solver on the quasi-score."""
    return _newton(_Problem(data, model), theta_init, tol, max_iter, fix)


# ---------------------------------------------------------------------------
# initial estimator: truncated realized volatility + coarse profile grid
# ---------------------------------------------------------------------------

def initial_theta(data: PathSample, model: SdeModel | None = None) -> Theta:
    dx = data.increments
    n = data.n
    rt = math.sqrt(n)
    model_eff = model or constant_sde_model()
    x = data.values[:-1]
    a1 = np.asarray(model_eff.a(x, 1.0), dtype=float)  # unit-sigma diffusion shape
    # pass 1: MAD scale of the locally standardized increments
    s_prelim = max(float(np.median(np.abs(dx) * rt / a1)) / 0.6745, SCALE_MIN)
    # pass 2: truncated realized volatility, threshold 3 local sd
    keep = np.abs(dx) <= 3.0 * s_prelim * a1 / rt
    if keep.sum() < max(8, n // 20):
        keep = np.ones_like(keep)
    target = n * float(np.sum(dx[keep] ** 2)) / (keep.sum() * _TRUNC_CORR)
    sigma0 = float(np.clip(math.sqrt(target / np.mean(a1[keep] ** 2)), SCALE_MIN, SCALE_MAX))
    # profile grid over (delta, alpha) at fixed sigma
    prob = _Problem(data, model)
    best = None
    for alpha in (0.4, 0.75, 1.1, 1.45, 1.8):
        for dmul in (0.25, 0.5, 1.0, 2.0, 4.0):
            cand = Theta(sigma0, max(dmul * sigma0, SCALE_MIN), alpha)
            try:
                ll = prob.loglik(cand)
            except (OutOfRegime, FloatingPointError):
                continue
            if best is None or ll > best[0]:
                best = (ll, cand)
    if best is None:
        return Theta(sigma0, sigma0, 1.0)
    return best[1]


# ---------------------------------------------------------------------------
# external increment files: one increment per line, header with n
# ---------------------------------------------------------------------------

def write_increments(path, increments) -> None:
    inc = np.asarray(increments, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"n {inc.size}\n")
        for v in inc:
            fh.write(f"{float(v)!r}\n")


def read_increments(path) -> PathSample:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n":
            raise ValueError(f"{path}: expected header 'n <count>'")
        n = int(header[1])
        inc = np.array([float(line) for line in fh if line.strip()])
    if inc.size != n:
        raise ValueError(f"{path}: header says n={n} but found {inc.size} increments")
    return PathSample.from_increments(inc)
