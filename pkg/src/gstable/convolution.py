"""Transition density of the Gaussian (x) stable convolution and its
parameter derivatives.

Everything reduces to the two-index family

    f^(k,l,m)(y, w) = int D^k(phi)(y - w z) D^l(d^m_alpha phi_alpha)(z) dz

with phi the standard normal density and D(f) = (y f)'.  On |y| <= 20 the
family is evaluated through its cosine transform

    f^(k,l,m)(y, w) = (1/pi) int_0^inf cos(y u) A_k(u) B_{l,m}(w u) du,

where A_k = (-u d/du)^k exp(-u^2/2) and B_{l,m} = (-v d/dv)^l d^m_alpha
exp(-v^alpha); the Gaussian factor truncates the integrand near u = 38, so a
single fixed Gauss-Legendre grid serves every (k,l,m) and every w.  Beyond
|y| = 20 the Gaussian factor is spent and the family follows the stable tail
series convolved against Gaussian moments.

The density of an increment is p(y, theta, n) = (sqrt(n)/sigma) f(ytil, w)
at ytil = sqrt(n) y / sigma and w = n^{1/2 - 1/alpha} delta / sigma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from ._quad import gl_panel_nodes, geometric_edges
from .errors import OutOfRegime
from .stable_core import (ALPHA_MAX, ALPHA_MIN, as_alpha, c_alpha,
                          deriv_power_log, stable_tail_terms)

# |y| beyond which the tail series takes over from the cosine transform
Y_SWITCH = 20.0
# w regime: the asymptotic machinery is proven on (0, 1/3]; batch evaluation
# tolerates the wider range needed by small-n Monte Carlo and line searches
W_STRICT = 1.0 / 3.0
W_EVAL_MAX = 2.0

SCALE_MIN = 1e-6
SCALE_MAX = 1e6

HESSIAN_KLMS = ((0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0), (0, 0, 1),
                (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2))
GRAD_KLMS = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class Theta:
    """Parameter triple (sigma, delta, alpha)."""

    sigma: float
    delta: float
    alpha: float

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.delta > 0.0):
            raise ValueError("sigma and delta must be strictly positive")
        object.__setattr__(self, "alpha", as_alpha(self.alpha))

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.delta, self.alpha])

    @classmethod
    def from_array(cls, arr) -> "Theta":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class WArg:
    """Effective scale ratio w = n^{1/2-1/alpha} delta/sigma, kept in (0, 1/3]."""

    w: float
    n: int
    theta: Theta

    def __post_init__(self):
        if not (0.0 < self.w <= W_STRICT):
            raise OutOfRegime(f"w={self.w:g} outside (0, 1/3]: n too small for "
                              "the asymptotic density machinery", w=self.w)


def w_value(theta: Theta, n: int) -> float:
    return n ** (0.5 - 1.0 / theta.alpha) * theta.delta / theta.sigma


def w_n(theta: Theta, n: int) -> WArg:
    if n < 2:
        raise ValueError("need n >= 2")
    return WArg(w=w_value(theta, n), n=int(n), theta=theta)


# ---------------------------------------------------------------------------
# fixed u-grid for the cosine transform
# ---------------------------------------------------------------------------

U_MAX = 38.0          # exp(-u^2/2) ~ 1e-314 past here
_Y_RESOLVE = 22.0     # grid resolves cos(yu) for |y| a bit beyond Y_SWITCH


@lru_cache(maxsize=1)
def _ugrid() -> tuple[np.ndarray, np.ndarray]:
    lo = geometric_edges(0.0, 0.5, ratio=2.0, head=1e-8)
    width = math.pi / _Y_RESOLVE
    hi = np.arange(lo[-1] + width, U_MAX + width, width)
    edges = np.concatenate([lo, hi[hi < U_MAX], [U_MAX]])
    return gl_panel_nodes(edges, n_per=10)


def _gauss_factor(u: np.ndarray, k: int) -> np.ndarray:
    Eg = np.exp(-0.5 * u * u)
    if k == 0:
        return Eg
    if k == 1:
        return u ** 2 * Eg
    if k == 2:
        return (u ** 4 - 2.0 * u ** 2) * Eg
    raise ValueError("k <= 2")


# (-v d/dv)^l d^m_alpha exp(-v^alpha) as {(i, j): coef} * t^i L^j exp(-t),
# t = v^alpha, L = ln v.  Validated against finite differences in the tests.
def _b_terms(l: int, m: int, a: float) -> dict[tuple[int, int], float]:
    a2 = a * a
    table = {
        (0, 0): {(0, 0): 1.0},
        (0, 1): {(1, 1): -1.0},
        (0, 2): {(1, 2): -1.0, (2, 2): 1.0},
        (0, 3): {(1, 3): -1.0, (2, 3): 3.0, (3, 3): -1.0},
        (1, 0): {(1, 0): a},
        (2, 0): {(1, 0): -a2, (2, 0): a2},
        (1, 1): {(1, 1): a, (1, 0): 1.0, (2, 1): -a},
        (2, 1): {(1, 1): -a2, (1, 0): -2.0 * a, (2, 1): 3.0 * a2, (2, 0): 2.0 * a, (3, 1): -a2},
        (1, 2): {(1, 2): a, (1, 1): 2.0, (2, 2): -3.0 * a, (2, 1): -2.0, (3, 2): a},
        (2, 2): {(1, 2): -a2, (1, 1): -4.0 * a, (1, 0): -2.0, (2, 2): 7.0 * a2,
                 (2, 1): 12.0 * a, (2, 0): 2.0, (3, 2): -6.0 * a2, (3, 1): -4.0 * a, (4, 2): a2},
    }
    return table[(l, m)]


def _stable_factor(v: np.ndarray, alpha: float, l: int, m: int) -> np.ndarray:
    t = np.power(v, alpha)
    E = np.exp(-t)
    if (l, m) == (0, 0):
        return E
    with np.errstate(divide="ignore"):
        L = np.log(np.where(v > 0.0, v, 1.0))
    acc = np.zeros_like(t)
    for (i, j), c in _b_terms(l, m, alpha).items():
        acc += c * t ** i * L ** j
    return acc * E


# ---------------------------------------------------------------------------
# tail series: stable tail terms convolved against Gaussian moments
# ---------------------------------------------------------------------------

_J_CAP = 18
_I_MAX = 10


@lru_cache(maxsize=8)
def _moments_Dk(k: int) -> tuple[float, ...]:
    m = [0.0] * (_I_MAX + 1)
    m[0] = 1.0
    for i in range(2, _I_MAX + 1, 2):
        m[i] = m[i - 2] * (i - 1)
    for _ in range(k):
        m = [-i * m[i] for i in range(_I_MAX + 1)]
    return tuple(m)


def _family_tail_multi(alpha: float, y: np.ndarray, w: float, klms) -> dict:
    """Vectorized tail branch for y > Y_SWITCH (y positive), all families at
    once; per-y optimal truncation of the j-series."""
    y = np.asarray(y, dtype=float)
    lnw = math.log(w)
    lny = np.log(y)
    lyw = lny - lnw
    out = {}
    pow_cache: dict[float, np.ndarray] = {}
    logpow_cache: dict[int, np.ndarray] = {}

    def ypow(expo: float) -> np.ndarray:
        if expo not in pow_cache:
            pow_cache[expo] = np.exp(-expo * lny)
        return pow_cache[expo]

    def lyw_pow(q: int) -> np.ndarray:
        if q not in logpow_cache:
            logpow_cache[q] = lyw ** q
        return logpow_cache[q]

    for (k, l, m) in klms:
        moments = _moments_Dk(k)
        per_j = []
        for j in range(1, _J_CAP + 1):
            sj = j * alpha + 1.0
            contrib = np.zeros_like(y)
            for q, cq in stable_tail_terms(alpha, l, m, j).items():
                if cq == 0.0:
                    continue
                for i in range(0, _I_MAX + 1, 2):
                    Mi = moments[i]
                    if Mi == 0.0:
                        continue
                    base = Mi / math.factorial(i) * cq
                    for (ds, dq), c in deriv_power_log(sj, q, i).items():
                        contrib += base * c * ypow(sj + ds) * lyw_pow(dq)
            per_j.append(w ** (sj - 1.0) * contrib)
        stacked = np.stack(per_j)                        # (J, ny)
        mags = np.abs(stacked)
        floor = 1e-16 * np.max(mags, axis=0, keepdims=True)
        mags = np.where(mags <= floor, np.inf, mags)     # ignore sin-zero junk
        jstar = np.argmin(mags, axis=0)                  # optimal truncation per y
        mask = np.arange(_J_CAP)[:, None] <= jstar[None, :]
        out[(k, l, m)] = np.sum(np.where(mask & np.isfinite(mags), stacked, 0.0), axis=0)
    return out


def _family_tail(alpha: float, y: np.ndarray, w: float, k: int, l: int, m: int) -> np.ndarray:
    return _family_tail_multi(alpha, y, w, [(k, l, m)])[(k, l, m)]


def family_values(alpha, y, w: float, klms, y_switch: float = Y_SWITCH) -> dict:
    """f^(k,l,m)(y, w) for each requested (k,l,m), vectorized over y."""
    a = as_alpha(alpha)
    if not (0.0 < w <= W_EVAL_MAX):
        raise OutOfRegime(f"w={w:g} outside evaluable range (0, {W_EVAL_MAX}]", w=w)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ay = np.abs(y)                                   # all families are even
    near = ay <= y_switch
    # the cosine transform computes values as cancellations of an O(1)
    # integrand; where the density scale sits below the float64 floor, hand
    # the point to the tail series instead (valid from |y| ~ 10 on)
    if np.any(near):
        envelope = (np.exp(-0.5 * np.minimum(ay, 40.0) ** 2) / math.sqrt(2.0 * math.pi)
                    + c_alpha(a) * w ** a * np.minimum(1.0, np.maximum(ay, 1e-9) ** (-a - 1.0)))
        near &= ~((ay >= 10.0) & (envelope < 1e-12))
    out = {klm: np.empty_like(ay) for klm in klms}
    if np.any(near):
        u, uw = _ugrid()
        cached = _workspace_cos() if (y is _YGRID and y_switch == Y_SWITCH) else None
        for (k, l, m) in klms:
            integ = uw * _gauss_factor(u, k) * _stable_factor(w * u, a, l, m)
            if cached is not None:
                base_mask, cosm = cached
                vals = np.empty_like(ay)
                vals[base_mask] = cosm @ integ / math.pi
                out[(k, l, m)][near] = vals[near]
            else:
                out[(k, l, m)][near] = np.cos(np.outer(ay[near], u)) @ integ / math.pi
    if np.any(~near):
        tails = _family_tail_multi(a, ay[~near], w, klms)
        for klm in klms:
            out[klm][~near] = tails[klm]
    return out


def f_klm(alpha, k: int, l: int, m: int, y, w: float):
    """The convolution family itself; spec surface with the strict w regime."""
    if not (0 <= k <= 2 and 0 <= l <= 2 and 0 <= m <= 2 and k + l + m <= 4):
        raise ValueError("need k, l, m <= 2 and k + l + m <= 4")
    if not (0.0 < w <= W_STRICT):
        raise OutOfRegime(f"w={w:g} outside (0, 1/3]", w=w)
    vals = family_values(alpha, y, w, [(k, l, m)])[(k, l, m)]
    return float(vals[0]) if np.isscalar(y) or np.asarray(y).ndim == 0 else vals


# ---------------------------------------------------------------------------
# density and log-density derivatives in theta
# ---------------------------------------------------------------------------

def _lcoef(n: int, alpha: float) -> float:
    """Coefficient pairing h with k in the rate-compensated score component."""
    ln_n = math.log(n)
    return (ln_n - math.log(ln_n)) / (2.0 * alpha) - ln_n / alpha ** 2


def p_density(y, theta: Theta, n: int):
    """Transition density of one increment at sampling step 1/n."""
    warg = w_n(theta, n)
    rt = math.sqrt(n)
    ytil = rt * np.asarray(y, dtype=float) / theta.sigma
    vals = family_values(theta.alpha, ytil, warg.w, [(0, 0, 0)])[(0, 0, 0)]
    out = rt / theta.sigma * vals
    return float(out[0]) if np.asarray(y).ndim == 0 else out


def l_func(y, theta: Theta, n: int):
    """Rate-compensated alpha-score kernel l = [ (ln n - ln ln n)/(2 alpha)
    - ln n / alpha^2 ] h + k, evaluated at (sqrt(n) y / sigma, w_n)."""
    if n < 3:
        raise ValueError("need n >= 3 so ln ln n is defined")
    warg = w_n(theta, n)
    ytil = math.sqrt(n) * np.asarray(y, dtype=float) / theta.sigma
    vals = family_values(theta.alpha, ytil, warg.w, [(0, 1, 0), (0, 0, 1)])
    out = _lcoef(n, theta.alpha) * vals[(0, 1, 0)] + vals[(0, 0, 1)]
    return float(out[0]) if np.asarray(y).ndim == 0 else out


def _ratios(vals: dict) -> dict:
    f = vals[(0, 0, 0)]
    return {klm: vals[klm] / f for klm in vals if klm != (0, 0, 0)}


def grad_from_ratios(r: dict, sigma_slot: float, delta_slot: float, alpha: float, n: int):
    """(d_sigma, d_delta, d_alpha) of ln p from family ratios at (ytil, w).

    sigma_slot / delta_slot are the effective scales (a(x, sigma) and
    delta c(x) in the SDE case; sigma and delta for the Levy model).
    """
    L = math.log(n) / alpha ** 2
    gs = -r[(1, 0, 0)] / sigma_slot
    gd = -r[(0, 1, 0)] / delta_slot
    ga = r[(0, 0, 1)] - L * r[(0, 1, 0)]
    return gs, gd, ga


def hess_from_ratios(r: dict, sigma_slot: float, delta_slot: float, alpha: float, n: int):
    """Symmetric 3x3 Hessian entries of ln p from family ratios at (ytil, w)."""
    L = math.log(n) / alpha ** 2
    s = 1.0 / sigma_slot
    d = 1.0 / delta_slot
    F100, F200 = r[(1, 0, 0)], r[(2, 0, 0)]
    F010, F001 = r[(0, 1, 0)], r[(0, 0, 1)]
    F110, F101 = r[(1, 1, 0)], r[(1, 0, 1)]
    F020, F011, F002 = r[(0, 2, 0)], r[(0, 1, 1)], r[(0, 0, 2)]
    hss = s * s * (F100 + F200 - F100 ** 2)
    hsd = s * d * (F110 - F100 * F010)
    hsa = -s * (F101 - L * F110 - F100 * F001 + L * F100 * F010)
    hdd = d * d * (F010 + F020 - F010 ** 2)
    hda = -d * (F011 - L * F020 - F010 * F001 + L * F010 ** 2)
    haa = (F002 - 2.0 * L * F011 + L ** 2 * F020 + (2.0 * L / alpha) * F010
           - (F001 - L * F010) ** 2)
    return hss, hsd, hsa, hdd, hda, haa


def grad_log_p(y, theta: Theta, n: int) -> np.ndarray:
    """Gradient of ln p_{1/n}(y, theta) in (sigma, delta, alpha)."""
    warg = w_n(theta, n)
    ytil = math.sqrt(n) * float(y) / theta.sigma
    vals = family_values(theta.alpha, ytil, warg.w, GRAD_KLMS)
    gs, gd, ga = grad_from_ratios(_ratios(vals), theta.sigma, theta.delta, theta.alpha, n)
    return np.array([float(gs[0]), float(gd[0]), float(ga[0])])


def hess_log_p(y, theta: Theta, n: int) -> np.ndarray:
    """Hessian of ln p_{1/n}(y, theta); symmetric by construction."""
    warg = w_n(theta, n)
    ytil = math.sqrt(n) * float(y) / theta.sigma
    vals = family_values(theta.alpha, ytil, warg.w, HESSIAN_KLMS)
    hss, hsd, hsa, hdd, hda, haa = hess_from_ratios(
        _ratios(vals), theta.sigma, theta.delta, theta.alpha, n)
    H = np.array([[hss, hsd, hsa], [hsd, hdd, hda], [hsa, hda, haa]], dtype=float)
    return H[:, :, 0] if H.ndim == 3 else H


# ---------------------------------------------------------------------------
# batch evaluation: spline workspace reused across observations
# ---------------------------------------------------------------------------

_YGRID = np.concatenate([np.arange(0.0, 8.0, 0.025), np.geomspace(8.0, 3e5, 420)])


@lru_cache(maxsize=1)
def _workspace_cos():
    """Fixed cosine matrix for the workspace y-grid (shared across builds)."""
    u, _ = _ugrid()
    mask = _YGRID <= Y_SWITCH
    return mask, np.cos(np.outer(_YGRID[mask], u))


class FamilyWorkspace:
    """Spline-backed evaluation of log f and the nine log-density ratios.

    Built once per (alpha, w-levels) pair and queried for whole observation
    vectors; several orders of magnitude faster than pointwise quadrature and
    cross-checked against it in the tests.  Newton solvers rebuild the
    workspace whenever theta moves.
    """

    def __init__(self, alpha, w_levels, hessian: bool = True):
        self.alpha = as_alpha(alpha)
        w_levels = np.atleast_1d(np.asarray(w_levels, dtype=float))
        if np.any(w_levels <= 0.0) or np.any(w_levels > W_EVAL_MAX):
            raise OutOfRegime(f"w levels outside (0, {W_EVAL_MAX}]", w=float(w_levels.max()))
        self.w_levels = np.unique(w_levels)
        self.klms = HESSIAN_KLMS if hessian else GRAD_KLMS
        logf_cols = []
        ratio_cols = {klm: [] for klm in self.klms if klm != (0, 0, 0)}
        for w in self.w_levels:
            vals = family_values(self.alpha, _YGRID, float(w), self.klms)
            f = np.maximum(vals[(0, 0, 0)], 1e-300)
            logf_cols.append(np.log(f))
            for klm in ratio_cols:
                ratio_cols[klm].append(vals[klm] / f)
        self._single = self.w_levels.size == 1
        if self._single:
            self._logf = CubicSpline(_YGRID, logf_cols[0])
            self._ratio = {klm: CubicSpline(_YGRID, cols[0]) for klm, cols in ratio_cols.items()}
        else:
            lw = np.log(self.w_levels)
            self._logf = RectBivariateSpline(_YGRID, lw, np.column_stack(logf_cols),
                                             kx=3, ky=min(3, lw.size - 1))
            self._ratio = {klm: RectBivariateSpline(_YGRID, lw, np.column_stack(cols),
                                                    kx=3, ky=min(3, lw.size - 1))
                           for klm, cols in ratio_cols.items()}

    def _eval(self, spl, ay, w):
        if self._single:
            return spl(ay)
        return spl.ev(ay, np.log(w))

    def query(self, ytil, w) -> dict:
        """logf and ratios at |ytil|; w scalar or per-observation vector."""
        ay = np.abs(np.asarray(ytil, dtype=float))
        w = np.broadcast_to(np.asarray(w, dtype=float), ay.shape)
        inside = ay <= _YGRID[-1]
        out = {"logf": np.empty_like(ay)}
        for klm in self._ratio:
            out[klm] = np.empty_like(ay)
        out["logf"][inside] = self._eval(self._logf, ay[inside], w[inside])
        for klm, spl in self._ratio.items():
            out[klm][inside] = self._eval(spl, ay[inside], w[inside])
        if np.any(~inside):
            # rare giant increments: direct tail evaluation, point by point
            idx = np.nonzero(~inside)[0]
            for i in idx:
                vals = {klm: _family_tail(self.alpha, np.array([ay[i]]), float(w[i]), *klm)[0]
                        for klm in self.klms}
                out["logf"][i] = math.log(max(vals[(0, 0, 0)], 1e-300))
                for klm in self._ratio:
                    out[klm][i] = vals[klm] / max(vals[(0, 0, 0)], 1e-300)
        return out
