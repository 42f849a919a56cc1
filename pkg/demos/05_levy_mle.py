"""Maximum likelihood on simulated Levy data: simulate, fit from a cold
start, and compare the normalized error against the asymptotic covariance."""
import numpy as np

from gstable import (Theta, info_levy, initial_theta, mle_levy, rate_matrix,
                     replication_rng, sample_levy_path)

theta0 = Theta(1.0, 1.0, 1.5)
n = 10**4
path = sample_levy_path(theta0, n, replication_rng(7, 0))

init = initial_theta(path)
print("initial guess:", init)

res = mle_levy(path, init)
print("theta_hat:", res.theta_hat)
print("converged:", res.converged, "iterations:", res.iterations,
      "score norm:", res.score_norm)

err = rate_matrix(theta0, n).inverse @ (res.theta_hat.as_array() - theta0.as_array())
print("normalized error u_n^{-1}(theta_hat - theta0):", err)
print("asymptotic covariance I^{-1} diag:", np.diag(np.linalg.inv(info_levy(theta0).M)))
