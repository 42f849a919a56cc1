"""gstable: joint estimation of diffusion, jump-scale and jump-activity
parameters for Levy processes and Levy-driven SDEs from high-frequency data.

The package evaluates the Gaussian (x) stable transition density and its
parameter derivatives, the non-diagonal optimal rate matrix and Fisher
information matrices, simulates the relevant processes, and runs maximum
likelihood / quasi-likelihood estimation with Monte Carlo verification tools.
"""
from .convolution import (Theta, WArg, f_klm, grad_log_p, hess_log_p, l_func,
                          p_density, w_n, FamilyWorkspace)
from .stable_core import (AlphaIndex, StableTable, D_iterate, build_stable_table,
                          c_alpha, d_alpha_c_alpha, stable_pdf)
from .asymptotics import (InfoMatrix, RateMatrix, I_cal, Psi_closed,
                          info_diagonal_singular, info_levy, info_sde, kappa0,
                          kappa1, prop_tout_check, psi, rate_matrix)
from .simulate import (PathSample, SdeModel, TemperingSpec, default_sde_model,
                       constant_sde_model, replication_rng, sample_levy_path,
                       sample_locally_stable_increments, sample_sde_path,
                       sample_stable, stable_tau)
from .estimate import (EstimationResult, hessian_levy, initial_theta, loglik_levy,
                       mle_levy, qmle_sde, quasi_score_sde, read_increments,
                       score_levy, write_increments)
from .experiments import (ExperimentRecord, Scenario, cmd_density_validate,
                          cmd_estimate, cmd_lan_check, cmd_simulate, cmd_tout_check,
                          cmd_tv_study, kde_l1_distance)
from . import errors

__version__ = "0.1.0"
