"""Samplers: exact stable draws, Levy model paths, locally stable increments
(tempered jump measure) and Euler paths of the jump SDE.

Reproducibility contract: every sampler takes a numpy Generator; replication
streams are derived from a master seed with ``replication_rng`` so sharded
parallel runs see the same streams as a serial run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import Theta
from .errors import CoefficientBoundViolated, PathExplosion, TemperingUnbounded
from .stable_core import as_alpha, c_alpha

PATH_BOX = 1e12


def replication_rng(master_seed: int, rep_index: int) -> np.random.Generator:
    """Stream for one replication: counter-based derivation from the master
    seed, identical whether replications run serially or sharded."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed),
                                                        spawn_key=(int(rep_index),)))


@dataclass
class PathSample:
    """Discrete observations X_{i/n}, i = 0..n, of a path on [0, 1]."""

    n: int
    values: np.ndarray
    seed: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n + 1,):
            raise ValueError("values must have length n + 1")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @classmethod
    def from_increments(cls, increments, x0: float = 0.0, seed: dict | None = None) -> "PathSample":
        inc = np.asarray(increments, dtype=float)
        return cls(n=inc.size, values=np.concatenate([[x0], x0 + np.cumsum(inc)]),
                   seed=seed or {})


@dataclass
class SdeModel:
    """Coefficients of dX = b dt + a(X, sigma) dB + delta c(X-) dL.

    Callables must be vectorized in x; lower bounds are the declared H1
    constants (a_lower may depend on sigma).
    """

    a: callable
    da_dsigma: callable
    d2a_dsigma2: callable
    b: callable
    c: callable
    a_lower: object        # float or callable sigma -> float
    c_lower: float

    def a_bound(self, sigma: float) -> float:
        return self.a_lower(sigma) if callable(self.a_lower) else float(self.a_lower)


def default_sde_model() -> SdeModel:
    """Bounded-coefficient test model: a = sigma (2 + cos x), b = -x,
    c = 2 + sin x; satisfies the regularity and lower-bound assumptions."""
    return SdeModel(
        a=lambda x, s: s * (2.0 + np.cos(x)),
        da_dsigma=lambda x, s: 2.0 + np.cos(x),
        d2a_dsigma2=lambda x, s: np.zeros_like(np.asarray(x, dtype=float)),
        b=lambda x: -x,
        c=lambda x: 2.0 + np.sin(x),
        a_lower=lambda s: s,
        c_lower=1.0,
    )


def constant_sde_model() -> SdeModel:
    """a = sigma, b = 0, c = 1: the Levy model written as an SDE."""
    one = lambda x: np.ones_like(np.asarray(x, dtype=float))
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return SdeModel(a=lambda x, s: s * one(x), da_dsigma=lambda x, s: one(x),
                    d2a_dsigma2=lambda x, s: zero(x), b=zero, c=one,
                    a_lower=lambda s: s, c_lower=1.0)


@dataclass(frozen=True)
class TemperingSpec:
    """Even, non-negative, bounded tempering of the stable jump measure with
    tau(z) = 1 + O(|z|) near zero."""

    kind: str              # "truncation" | "exponential"
    eta: float = 1.0       # truncation radius / certificate radius
    lam: float = 1.0       # exponential decay rate
    bound: float = 1.0     # sup tau
    lipschitz: float = None

    def __post_init__(self):
        if self.kind not in ("truncation", "exponential"):
            raise ValueError("kind must be truncation or exponential")
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz",
                               0.0 if self.kind == "truncation" else self.lam)

    def tau(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "truncation":
            return (np.abs(z) <= self.eta).astype(float)
        return np.exp(-self.lam * np.abs(z))

    def check_near_zero(self, n_probe: int = 64) -> bool:
        """Numerical certificate |tau(z) - 1| <= L |z| on 0 < |z| <= eta."""
        z = np.linspace(self.eta / n_probe, self.eta, n_probe)
        return bool(np.all(np.abs(self.tau(z) - 1.0) <= self.lipschitz * z + 1e-12))


def stable_tau() -> TemperingSpec:
    """tau identically 1 on a huge radius: the exactly stable case."""
    return TemperingSpec(kind="truncation", eta=1e30)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_stable(alpha, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws with characteristic function exp(-|u|^alpha), by the
    Chambers-Mallows-Stuck transform (symmetric case)."""
    a = as_alpha(alpha)
    if count < 1:
        raise ValueError("count >= 1")
    V = (rng.random(count) - 0.5) * math.pi
    if abs(a - 1.0) < 1e-12:
        return np.tan(V)
    W = rng.exponential(1.0, count)
    return (np.sin(a * V) / np.cos(V) ** (1.0 / a)
            * (np.cos((a - 1.0) * V) / W) ** ((1.0 - a) / a))


def sample_levy_path(theta: Theta, n: int, rng: np.random.Generator) -> PathSample:
    """Path of Y = sigma B + delta S^alpha observed at i/n, via self-similar
    scaling of independent increments."""
    gauss = theta.sigma * n ** -0.5 * rng.standard_normal(n)
    jumps = theta.delta * n ** (-1.0 / theta.alpha) * sample_stable(theta.alpha, n, rng)
    return PathSample.from_increments(gauss + jumps)


def _coupled_increments(alpha: float, tau: TemperingSpec, n: int, count: int,
                        rng: np.random.Generator, eps_frac: float = 16.0):
    """count i.i.d. increments over time 1/n of (S, L) built from one jump
    stream: the stable side keeps every proposal jump, the tempered side
    thins with probability tau(z)/sup tau.  Sub-cutoff jumps enter through a
    shared variance-matched Gaussian residual.
    """
    a = as_alpha(alpha)
    ca = c_alpha(a)
    tau_max = float(tau.bound)
    kappa = n ** (-1.0 / a)
    eps = kappa / eps_frac
    prop_max = max(tau_max, 1.0)
    lam = 2.0 * ca * prop_max * eps ** (-a) / (a * n)
    N = rng.poisson(lam, size=count)
    total = int(N.sum())
    mags = eps * np.power(rng.random(total), -1.0 / a)
    signs = rng.integers(0, 2, size=total) * 2.0 - 1.0
    Z = mags * signs
    tau_vals = tau.tau(Z)
    if np.any(tau_vals > tau_max * (1.0 + 1e-12)):
        raise TemperingUnbounded("tau exceeded its declared bound during rejection")
    U = rng.random(total) * prop_max
    keep_L = U < tau_vals
    keep_S = U < 1.0
    idx = np.repeat(np.arange(count), N)
    S = np.bincount(idx, weights=np.where(keep_S, Z, 0.0), minlength=count)
    L = np.bincount(idx, weights=np.where(keep_L, Z, 0.0), minlength=count)
    # residual variances: int_{|z|<=eps} z^2 tau(z) nu(dz) (log grid; the
    # integrand z^{1-alpha} is singular at 0 for alpha > 1)
    var_S = (2.0 * ca / n) * eps ** (2.0 - a) / (2.0 - a)
    zg = np.exp(np.linspace(math.log(eps) - 36.0, math.log(eps), 4001))
    tau_g = tau.tau(zg)
    if np.all(tau_g == 1.0):
        var_L = var_S          # exactly stable below the cutoff
    else:
        var_L = 2.0 * np.trapezoid(zg ** (1.0 - a) * tau_g, zg) * ca / n
    G = rng.standard_normal(count)
    S = S + math.sqrt(var_S) * G
    L = L + math.sqrt(max(var_L, 0.0)) * G
    return S, L


def sample_locally_stable_increments(alpha, tau: TemperingSpec, n: int,
                                     rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. copies of L^{alpha,tau}_{1/n}."""
    _, L = _coupled_increments(alpha, tau, n, n, rng)
    return L


def sample_coupled_stable_pair(alpha, tau: TemperingSpec, n: int, count: int,
                               rng: np.random.Generator):
    """(n^{1/alpha} S_{1/n}, n^{1/alpha} L_{1/n}) coupled; used by the total
    variation study, where the shared stream cancels Monte Carlo noise."""
    S, L = _coupled_increments(alpha, tau, n, count, rng)
    scale = n ** (1.0 / as_alpha(alpha))
    return scale * S, scale * L


def sample_sde_path(model: SdeModel, theta: Theta, tau: TemperingSpec, n: int,
                    m: int = 32, rng: np.random.Generator | None = None,
                    x0: float = 0.0) -> PathSample:
    """Euler-Maruyama on the fine grid of n*m steps, subsampled to n points."""
    if m < 1:
        raise ValueError("m >= 1")
    if rng is None:
        rng = np.random.default_rng()
    fine = n * m
    dB = fine ** -0.5 * rng.standard_normal(fine)
    dL = sample_locally_stable_increments(theta.alpha, tau, fine, rng)
    a_low = model.a_bound(theta.sigma)
    x = np.empty(fine + 1)
    x[0] = x0
    xc = x0
    dt = 1.0 / fine
    a_fn, b_fn, c_fn = model.a, model.b, model.c
    sig, dlt = theta.sigma, theta.delta
    for i in range(fine):
        av = a_fn(xc, sig)
        cv = c_fn(xc)
        if av < a_low - 1e-12 or cv < model.c_lower - 1e-12:
            raise CoefficientBoundViolated(f"coefficient bound violated at x={xc:g}")
        xc = xc + b_fn(xc) * dt + av * dB[i] + dlt * cv * dL[i]
        if abs(xc) > PATH_BOX:
            raise PathExplosion(f"|X| exceeded {PATH_BOX:g} at step {i}")
        x[i + 1] = xc
    return PathSample(n=n, values=x[::m].copy())
