"""A short gradient-flow run from the degree-1 initial data and its analysis.

The full reference run (t = 1, n = 50) takes about half a minute; this one
stops at t = 0.3.
"""
# %%
import numpy as np

from ferrosim.diagnostics import analysis_summary
from ferrosim.flow import FlowConfig, run
from ferrosim.potential import ModelParams, potential_constants

params = ModelParams(1.0, 0.05)
cfg = FlowConfig(params, grid_n=50, tau=1e-3, t_end=0.3, snapshot_times=(0.1, 0.2))
res = run(cfg)

# %%
E = res.energies
print(f"{len(res.reports)} steps, energy {E[0]:.4f} -> {E[-1]:.4f}, monotone: {bool(np.all(np.diff(E) <= 0))}")
out = analysis_summary(res.final, potential_constants(params))
for d in out["defects"]:
    print(f"defect at ({d['x']:.3f}, {d['y']:.3f}) charge {d['charge']} core radius {d['core_radius']:.4f}")
for comp in out["jump_components"]:
    print("jump component, corrected length", round(comp["length_corrected"], 4))
print("total plaquette winding:", out["total_winding"])
