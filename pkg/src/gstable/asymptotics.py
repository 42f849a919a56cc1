"""Rate matrices, tail weights, information matrices and the limit-ratio
diagnostics that identify the Fisher information.

The normalization mixing the jump-scale and jump-activity directions is

    u_n(theta) = [[ n^{-1/2},      0,          0        ],
                  [ 0,             r_n,        r_n c_n  ],
                  [ 0,             0,          r_n      ]]

with r_n = (ln n / n)^{alpha/4} and c_n = -(delta / 2 alpha)(ln n - ln ln n);
its determinant is n^{-1/2} (ln n / n)^{alpha/2} exactly.  The limit
information I(theta) is parametrized by

    kappa0 = 2 c_alpha / (alpha (2-alpha)^{alpha/2}) (delta/sigma)^alpha,
    kappa1 = ln(delta/sigma) + c_alpha'/c_alpha - ln(2-alpha)/2 - 1/alpha.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import gl_panel_nodes
from .convolution import Theta, _lcoef, family_values, w_value
from .errors import CoefficientBoundViolated, RateDegenerate
from .stable_core import as_alpha, c_alpha, d_alpha_c_alpha, gaussian_D

_PSI_BRIDGE_VERSION = "quintic-hermite-1"   # frozen; changes alter test constants


# ---------------------------------------------------------------------------
# truncated tail weight psi^(p): 1 on |y|<=1, (ln|y|)^p/|y|^(alpha+1) on
# |y|>=3, C^2 quintic Hermite bridge in between
# ---------------------------------------------------------------------------

def _tail_value_d1_d2(alpha: float, p: int, y: float) -> tuple[float, float, float]:
    L = math.log(y)
    v = L ** p / y ** (alpha + 1.0)
    d1 = (p * L ** (p - 1) if p else 0.0) - (alpha + 1.0) * L ** p
    d1 /= y ** (alpha + 2.0)
    d2 = ((p * (p - 1) * L ** (p - 2) if p >= 2 else 0.0)
          - (p * (2.0 * alpha + 3.0) * L ** (p - 1) if p else 0.0)
          + (alpha + 1.0) * (alpha + 2.0) * L ** p)
    d2 /= y ** (alpha + 3.0)
    return v, d1, d2


def _bridge_coeffs(alpha: float, p: int) -> np.ndarray:
    """Quintic Hermite bridge coefficients in the shifted variable
    t = (y - 1)/2 (well conditioned; the raw power basis on [1,3] is not)."""
    v3, d13, d23 = _tail_value_d1_d2(alpha, p, 3.0)
    # P(0)=1, P'(0)=P''(0)=0 fix c0..c2; solve for c3..c5 at t=1
    A = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    b = np.array([v3 - 1.0, 2.0 * d13, 4.0 * d23])
    c_hi = np.linalg.solve(A, b)
    return np.concatenate([[1.0, 0.0, 0.0], c_hi])


def psi(alpha, p: int, y):
    """Smooth truncated tail weight; C^2, even, non-negative."""
    a = as_alpha(alpha)
    if not 0 <= p <= 3:
        raise ValueError("p <= 3")
    yarr = np.abs(np.asarray(y, dtype=float))
    out = np.ones_like(yarr)
    far = yarr >= 3.0
    if np.any(far):
        L = np.log(yarr[far])
        out[far] = L ** p / yarr[far] ** (a + 1.0)
    mid = (yarr > 1.0) & (yarr < 3.0)
    if np.any(mid):
        coeff = _bridge_coeffs(a, p)
        out[mid] = np.polynomial.polynomial.polyval(0.5 * (yarr[mid] - 1.0), coeff)
    return float(out) if np.asarray(y).ndim == 0 else out


def I_cal(alpha, k: int, l: int, y):
    """int_{|z|>1} D^k(phi)(y - z) psi^(l)(z) dz by quadrature."""
    a = as_alpha(alpha)
    if not (0 <= k <= 2 and 0 <= l <= 3):
        raise ValueError("k <= 2, l <= 3")
    yarr = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(yarr)
    for i, yv in enumerate(yarr):
        pieces = []
        for lo, hi in [(-abs(yv) - 45.0, -1.0), (1.0, abs(yv) + 45.0)]:
            if hi <= lo:
                continue
            edges = np.linspace(lo, hi, max(int((hi - lo) / 0.25), 8) + 1)
            nodes, wts = gl_panel_nodes(edges, n_per=8)
            pieces.append(np.dot(wts, gaussian_D(yv - nodes, k) * psi(a, l, nodes)))
        out[i] = sum(pieces)
    return float(out[0]) if np.asarray(y).ndim == 0 else out


def Psi_closed(alpha, p: int, z: float) -> float:
    """int_{|y|>z} psi^(p)(y) dy in closed form, valid on the pure tail z >= 3."""
    a = as_alpha(alpha)
    if z < 3.0:
        raise ValueError("closed form needs z >= 3")
    lz = math.log(z)
    za = a * z ** a
    if p == 0:
        return 2.0 / za
    if p == 1:
        return (2.0 * lz + 2.0 / a) / za
    if p == 2:
        return (2.0 * lz ** 2 + 4.0 * lz / a + 4.0 / a ** 2) / za
    raise ValueError("p <= 2")


# ---------------------------------------------------------------------------
# rate matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateMatrix:
    n: int
    theta: Theta
    M: np.ndarray

    @property
    def inverse(self) -> np.ndarray:
        rn = self.M[1, 1]
        cn = self.M[1, 2] / rn
        inv = np.diag([1.0 / self.M[0, 0], 1.0 / rn, 1.0 / rn])
        inv[1, 2] = -cn / rn
        return inv

    @property
    def transpose(self) -> np.ndarray:
        return self.M.T


def rate_matrix(theta: Theta, n: int) -> RateMatrix:
    if n < 16:
        raise RateDegenerate(f"n={n} < 16: rate machinery needs ln ln n comfortably positive")
    ln_n = math.log(n)
    r = (ln_n / n) ** (theta.alpha / 4.0)
    c = -(theta.delta / (2.0 * theta.alpha)) * (ln_n - math.log(ln_n))
    M = np.array([[n ** -0.5, 0.0, 0.0],
                  [0.0, r, r * c],
                  [0.0, 0.0, r]])
    return RateMatrix(n=int(n), theta=theta, M=M)


# ---------------------------------------------------------------------------
# information matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InfoMatrix:
    M: np.ndarray
    kind: str            # "levy" | "sde" | "diagonal-singular"

    @property
    def jump_block(self) -> np.ndarray:
        return self.M[1:, 1:]


def kappa0(theta: Theta) -> float:
    a = theta.alpha
    return 2.0 * c_alpha(a) / (a * (2.0 - a) ** (a / 2.0)) * (theta.delta / theta.sigma) ** a


def kappa1(theta: Theta) -> float:
    a = theta.alpha
    return (math.log(theta.delta / theta.sigma) + d_alpha_c_alpha(a) / c_alpha(a)
            - math.log(2.0 - a) / 2.0 - 1.0 / a)


def info_levy(theta: Theta) -> InfoMatrix:
    a, d = theta.alpha, theta.delta
    k0, k1 = kappa0(theta), kappa1(theta)
    M = np.array([[2.0 / theta.sigma ** 2, 0.0, 0.0],
                  [0.0, a ** 2 * k0 / d ** 2, a * k0 * k1 / d],
                  [0.0, a * k0 * k1 / d, k0 * (k1 ** 2 + 1.0 / a ** 2)]])
    return InfoMatrix(M=M, kind="levy")


def info_diagonal_singular(sigma: float, delta: float, alpha) -> InfoMatrix:
    """Fisher information under the diagonal (marginally optimal) rates; the
    jump block is exactly rank one."""
    a = as_alpha(alpha)
    th = Theta(sigma, delta, a)
    k0 = kappa0(th)
    M = np.array([[2.0 / sigma ** 2, 0.0, 0.0],
                  [0.0, k0 * a ** 2 / delta ** 2, k0 * a / (2.0 * delta)],
                  [0.0, k0 * a / (2.0 * delta), k0 / 4.0]])
    return InfoMatrix(M=M, kind="diagonal-singular")


def info_sde(theta: Theta, path, model) -> InfoMatrix:
    """Riemann-sum approximation of the path-dependent limit information."""
    x = np.asarray(path.values[:-1], dtype=float)
    a_vals = model.a(x, theta.sigma)
    c_vals = model.c(x)
    a_low = model.a_lower(theta.sigma) if callable(model.a_lower) else model.a_lower
    if np.any(a_vals < a_low - 1e-12) or np.any(c_vals < model.c_lower - 1e-12):
        raise CoefficientBoundViolated("coefficient below declared lower bound on path")
    al = theta.alpha
    ca, dca = c_alpha(al), d_alpha_c_alpha(al)
    ratio = theta.delta * c_vals / a_vals
    k0 = 2.0 * ca / (al * (2.0 - al) ** (al / 2.0)) * ratio ** al
    k1 = np.log(ratio) + dca / ca - math.log(2.0 - al) / 2.0 - 1.0 / al
    da = model.da_dsigma(x, theta.sigma)
    M = np.array([
        [2.0 * np.mean((da / a_vals) ** 2), 0.0, 0.0],
        [0.0, al ** 2 / theta.delta ** 2 * np.mean(k0), al / theta.delta * np.mean(k0 * k1)],
        [0.0, al / theta.delta * np.mean(k0 * k1), np.mean(k0 * (k1 ** 2 + 1.0 / al ** 2))]])
    return InfoMatrix(M=M, kind="sde")


# ---------------------------------------------------------------------------
# limit-ratio diagnostics for the score moment integrals
# ---------------------------------------------------------------------------

def tout_integrals(theta: Theta, n: int, y_big: float = 3e6) -> dict:
    """Quadrature values of int h^2/f, int h l/f, int l^2/f at w_n(theta).

    Inner |y| <= 20 by the cosine-transform families, 20 < |y| <= y_big by the
    tail series on a log grid, plus the analytic envelope remainder beyond.
    """
    a = as_alpha(theta.alpha)
    w = w_value(theta, n)
    if w > 1.0 / 3.0:
        raise RateDegenerate(f"w_n={w:g} > 1/3: n too small for the tout regime")
    lcoef = _lcoef(n, a)
    klms = [(0, 0, 0), (0, 1, 0), (0, 0, 1)]
    e1 = np.linspace(0.0, 20.0, 121)
    e2 = np.geomspace(20.0, y_big, 241)
    acc = {"hh": 0.0, "hl": 0.0, "ll": 0.0}
    for edges in (e1, e2):
        ynod, ywts = gl_panel_nodes(edges, n_per=16)
        vals = family_values(a, ynod, w, klms)
        f = vals[(0, 0, 0)]
        h = vals[(0, 1, 0)]
        l = lcoef * h + vals[(0, 0, 1)]
        acc["hh"] += 2.0 * np.dot(ywts, h * h / f)
        acc["hl"] += 2.0 * np.dot(ywts, h * l / f)
        acc["ll"] += 2.0 * np.dot(ywts, l * l / f)
    # envelope remainder beyond y_big (relative weight ~ (M_n / y_big)^alpha)
    ca, dca = c_alpha(a), d_alpha_c_alpha(a)
    K = dca + ca * math.log(theta.delta / theta.sigma)
    lll = math.log(math.log(n))
    wa = w ** a
    P0, P1, P2 = (Psi_closed(a, p, y_big) for p in (0, 1, 2))
    acc["hh"] += a ** 2 * ca * wa * P0
    acc["hl"] += a * wa * (ca * P1 - (0.5 * ca * lll + K) * P0)
    acc["ll"] += wa / ca * (ca ** 2 * P2 - 2.0 * ca * (0.5 * ca * lll + K) * P1
                            + (0.5 * ca * lll + K) ** 2 * P0)
    return acc


def tout_limits(theta: Theta, n: int) -> dict:
    a = theta.alpha
    k0, k1 = kappa0(theta), kappa1(theta)
    base = n ** (1.0 - a / 2.0) * math.log(n) ** (a / 2.0)
    return {"hh": a ** 2 * k0 / base, "hl": -a * k0 * k1 / base,
            "ll": k0 * (k1 ** 2 + 1.0 / a ** 2) / base}


def prop_tout_check(theta: Theta, n: int) -> tuple[float, float, float]:
    """The three quadrature/limit ratios; they approach 1 as n grows."""
    I = tout_integrals(theta, n)
    L = tout_limits(theta, n)
    return (I["hh"] / L["hh"], I["hl"] / L["hl"], I["ll"] / L["ll"])
