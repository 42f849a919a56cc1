"""Rate matrices and Fisher information: the non-diagonal normalization makes
the jump block non-singular, unlike the diagonal (marginal) rates.
"""
import numpy as np

from gstable import Theta, info_diagonal_singular, info_levy, prop_tout_check, rate_matrix

theta = Theta(1.0, 1.0, 1.5)
u = rate_matrix(theta, 10**4)
print("u_n:\n", u.M)
print("det u_n:", np.linalg.det(u.M))

I = info_levy(theta)
print("\nI(theta):\n", I.M)
print("jump-block det:", np.linalg.det(I.jump_block), "(positive: identifiable)")

D = info_diagonal_singular(1.0, 1.0, 1.5)
print("diagonal-rate jump-block det:", np.linalg.det(D.jump_block), "(singular)")

print("\nscore-moment integral / limit ratios (approach 1 as n grows):")
for n in [10**4, 10**6]:
    print(f"  n={n}: {np.round(prop_tout_check(theta, n), 4)}")
