"""Simulators: exact stable draws, Levy paths, tempered (locally stable)
increments, and Euler paths of the jump SDE."""
import numpy as np

from gstable import (Theta, TemperingSpec, default_sde_model, replication_rng,
                     sample_levy_path, sample_locally_stable_increments,
                     sample_sde_path, sample_stable)

rng = replication_rng(2024, 0)
S = sample_stable(1.5, 10**5, rng)
print("stable draws: empirical cf at u=1:", np.mean(np.cos(S)), "vs", np.exp(-1.0))

path = sample_levy_path(Theta(1.0, 1.0, 1.5), 1000, rng)
print("levy path: n =", path.n, "max |increment| =", np.abs(path.increments).max())

tau = TemperingSpec("truncation", eta=1.0)
L = sample_locally_stable_increments(0.8, tau, 1000, rng)
print("tempered increments: all jumps <= eta (plus residual):", np.abs(L).max())

sde = sample_sde_path(default_sde_model(), Theta(1.0, 0.5, 1.2), tau, 1000, m=32, rng=rng)
print("sde path: X_1 =", sde.values[-1])
