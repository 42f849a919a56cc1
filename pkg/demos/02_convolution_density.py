"""The Gaussian (x) stable transition density p_{1/n}(y, theta) and its
log-derivatives, with a finite-difference cross-check.
"""
import numpy as np

from gstable import Theta, grad_log_p, hess_log_p, p_density, w_n

theta = Theta(sigma=1.0, delta=1.0, alpha=1.2)
n = 1000
print("w_n =", w_n(theta, n).w)

ys = np.array([0.0, 0.01, 0.03, 0.1])
print("p_{1/n}(y):", p_density(ys, theta, n))

y0 = 0.02
g = grad_log_p(y0, theta, n)
print("grad ln p:", g)

eps = 1e-5
num = (np.log(p_density(y0, Theta(theta.sigma + eps, theta.delta, theta.alpha), n))
       - np.log(p_density(y0, Theta(theta.sigma - eps, theta.delta, theta.alpha), n))) / (2 * eps)
print(f"finite-difference d/dsigma: {num:.8f} (analytic {g[0]:.8f})")

H = hess_log_p(y0, theta, n)
print("hessian ln p:\n", H)
