"""Quasi-likelihood estimation for the jump SDE with the default bounded
coefficient model."""
import numpy as np

from gstable import (Theta, TemperingSpec, default_sde_model, initial_theta,
                     qmle_sde, replication_rng, sample_sde_path)

theta0 = Theta(1.0, 0.5, 1.2)
model = default_sde_model()
tau = TemperingSpec("truncation", eta=1.0)
path = sample_sde_path(model, theta0, tau, 10**4, m=32, rng=replication_rng(11, 0))

res = qmle_sde(path, model, initial_theta(path, model))
print("theta_hat:", res.theta_hat)
print("converged:", res.converged, "iterations:", res.iterations)
print("path-dependent information:\n", np.round(res.info_used.M, 4))
