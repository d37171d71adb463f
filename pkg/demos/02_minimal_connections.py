"""Minimal connections, the canonical harmonic map and the renormalised energy."""
# %%
import numpy as np

from ferrosim.fields import Grid
from ferrosim.geometry import (
    canonical_angle, connection_is_disjoint, minimal_connection, minimize_w_beta, renormalized_energy,
    renormalized_energy_boundary, w_beta,
)
from ferrosim.potential import ModelParams

rng = np.random.default_rng(7)

# %%
pts = rng.uniform(0.1, 0.9, size=(6, 2))
conn = minimal_connection(pts)
print("pairs:", conn.pairing, " length:", round(conn.total_length, 6), " disjoint:", connection_is_disjoint(conn))

# %% [markdown]
# Two half-defects of degree 1.  The lattice ladder and the boundary-integral
# evaluation of W should agree on a fine grid.

# %%
pair = np.array([[0.303, 0.407], [0.691, 0.589]])
af = canonical_angle(pair, 1, Grid(100))
print("harmonicity residual:", af.laplacian_residual(4 / 100))
rn = renormalized_energy(pair, 1, Grid(200))
print("W ladder:", rn.W, " W boundary:", renormalized_energy_boundary(pair, 1))
params = ModelParams(1.0, 0.05)
print("W_beta:", w_beta(pair, 1, params))

# %% [markdown]
# Minimising W_beta balances the line tension of the jump against the
# logarithmic repulsion of the defects.

# %%
starts = [np.array([[0.3, 0.5], [0.7, 0.5]]), np.array([[0.5, 0.3], [0.5, 0.7]])]
for beta in (1.0, 5.0):
    res = minimize_w_beta(1, ModelParams(beta, 0.05), Grid(50), starts)
    sep = np.linalg.norm(res.points[0] - res.points[1])
    print(f"beta={beta}: points {np.round(res.points, 3).tolist()}  separation {sep:.3f}")
