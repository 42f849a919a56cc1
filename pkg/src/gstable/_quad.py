"""Shared quadrature helpers.

Two workhorses live here:

* composite Gauss-Legendre panels (with geometric subdivision for endpoint
  cusps of the u^alpha type), and
* a half-period integrator for oscillatory cosine transforms, which sums
  the alternating half-period contributions and accelerates the remainder
  by iterated averaging of partial sums (Euler transformation).  The
  acceleration is what makes slowly decaying envelopes such as
  exp(-u^alpha) for small alpha tractable.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonConvergedQuadrature

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def gl_panel_nodes(edges: np.ndarray, n_per: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre over consecutive edges."""
    xg, wg = gl_rule(n_per)
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def geometric_edges(a: float, b: float, ratio: float = 1.5, head: float | None = None) -> np.ndarray:
    """Panel edges from a to b growing geometrically; a may be 0 (tiny head panel)."""
    if b <= a:
        raise ValueError("need b > a")
    edges = [a]
    e = head if (a == 0.0 and head is not None) else a
    if a == 0.0:
        e = head if head is not None else min(1e-9, b * 1e-12)
        edges.append(e)
    while e < b:
        e = min(e * ratio, b)
        edges.append(e)
    return np.array(edges)


def integrate_panels(f, edges, n_per: int = 12) -> float:
    nodes, weights = gl_panel_nodes(np.asarray(edges, float), n_per)
    return float(np.dot(weights, f(nodes)))


def _euler_accelerate(partials: np.ndarray) -> float:
    """Limit estimate of an alternating series from its partial sums."""
    p = np.asarray(partials, dtype=float)
    while p.size > 1:
        p = 0.5 * (p[1:] + p[:-1])
    return float(p[0])


def oscillatory_cosine(envelope, z: float, phase: float, u_stop: float,
                       tol: float = 1e-10, n_per: int = 12,
                       max_half_periods: int = 220, warmup: int = 8) -> float:
    """Integrate envelope(u) * cos(z*u + phase) over [0, u_stop].

    The head up to the first cosine zero is integrated with geometric panels;
    subsequent half-periods form an alternating series whose tail is summed by
    Euler acceleration.  ``u_stop`` should be chosen so the envelope is
    negligible beyond it; if the half-period budget is exhausted before the
    accelerated estimate stabilises, NonConvergedQuadrature is raised.
    """
    z = abs(z)
    if z * u_stop < 1e-12:
        f = lambda u: envelope(u) * np.cos(z * u + phase)
        return integrate_panels(f, geometric_edges(0.0, u_stop, ratio=1.35), n_per)

    f = lambda u: envelope(u) * np.cos(z * u + phase)
    # first zero of cos(z u + phase) at positive u
    k0 = np.ceil((phase - np.pi / 2) / np.pi)
    u0 = (np.pi / 2 + k0 * np.pi - phase) / z
    while u0 <= 0:
        u0 += np.pi / z
    u0 = min(u0, u_stop)
    head = integrate_panels(f, geometric_edges(0.0, u0, ratio=1.4), n_per)
    if u0 >= u_stop:
        return head

    hp = np.pi / z
    xg, wg = gl_rule(n_per)
    lo = u0
    total = 0.0
    partials = []
    for k in range(max_half_periods):
        hi = min(lo + hp, u_stop)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        term = half * float(np.dot(wg, f(mid + half * xg)))
        total += term
        partials.append(total)
        lo = hi
        if lo >= u_stop:
            return head + total
        if k >= warmup and abs(term) < 1e-3 * tol:
            return head + total
        if k >= warmup + 40:
            est = _euler_accelerate(partials[warmup:])
            est2 = _euler_accelerate(partials[warmup + 1:])
            if abs(est - est2) < tol:
                return head + est
    est = _euler_accelerate(partials[warmup:])
    est2 = _euler_accelerate(partials[warmup + 2:])
    if abs(est - est2) < 10 * tol:
        return head + est
    raise NonConvergedQuadrature(
        f"oscillatory quadrature stalled at z={z:g} (residual {abs(est - est2):.2e})")
