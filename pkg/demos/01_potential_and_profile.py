"""Bulk potential, its constants and the one-dimensional interface profile."""
# %%
import numpy as np

from ferrosim.potential import ModelParams, c_beta, kappa_star, lambda_star, potential_constants
from ferrosim.profile1d import optimal_profile, tanh_profile

# %% [markdown]
# The constants depend on (beta, eps).  kappa_eps vanishes like eps and
# X_eps tends to 1 as eps -> 0.

# %%
for eps in (0.1, 0.05, 0.01, 0.001):
    c = potential_constants(ModelParams(1.0, eps))
    print(f"eps={eps:<6} X={c.x_eps:.10f} kappa={c.kappa_eps:.3e} lambda={c.lambda_eps:.6f}")
print("kappa* =", kappa_star(1.0), " lambda* =", lambda_star(1.0))

# %% [markdown]
# The optimal profile between the two magnetisation wells is a tanh; its
# cost is half the line tension c_beta.

# %%
for beta in (0.0, 1.0, 5.0):
    prof = optimal_profile(beta)
    err = np.max(np.abs(prof.us - tanh_profile(prof.ts, beta)))
    print(f"beta={beta}: cost {prof.energy:.8f}  c_beta/2 {0.5 * c_beta(beta):.8f}  |u - tanh| {err:.1e}")
