"""
Canonical equilibrium
=====================

Load the shipped instance, check its assumptions, solve the coupled
system under hyperbolic discounting and look at what came out.

Run from the repository root::

    python demos/01_canonical_equilibrium.py

Figures go to ``demo-out/`` (needs matplotlib, ``pip install .[demos]``).
"""

# %%
# Instance and checks
# -------------------

from pathlib import Path

import numpy as np

from eqsingular import equilibrium as eq, model
from eqsingular.config import load_config

ROOT = Path(__file__).resolve().parents[1]
OUT = Path("demo-out")

cfg = load_config(ROOT / "instances" / "remark52.cfg")
inst, grid = cfg.instance, cfg.grid
print(f"window [{grid.x_min}, {grid.x_max:.6f}], Nx={grid.Nx}, Nt={grid.Nt}, Ns={grid.Ns}")

remark = model.check_remark_example(model.RemarkParams.from_instance(inst))
print(remark.table())
print("grid inequalities ok:", model.check_assumption_grid(inst, grid).ok)

# %%
# Solve
# -----
# Penalty path by default; the trace has one entry per fixed-point step.

sol = eq.solve_equilibrium(inst, grid, cfg.options)
for row in sol.trace:
    print(row["iteration"], f"{row['delta_v']:.2e}", "coupled" if row["coupled"] else "")
print("converged:", sol.converged)

# %%
# The boundary sits at the window edge: v touches c only at x_max, so the
# purchasing region has no interior on this instance.

gf = sol.gamma.forward_values()
print(f"Γ(t) in [{gf.min():.6f}, {gf.max():.6f}], x* = {model.effective_terminal(inst).x_star:.6f}")

# %%
# Value and coupling at a few points

for x in (-4.0, -3.0, -2.0, grid.x_max):
    print(f"x={x:+.3f}  V(x,0)={eq.value_at(sol, inst, x, 0.0):.6f}")

res = eq.verify_residuals(sol, inst)
print(f"complementarity residual {res.hjb_tol:.3e} "
      f"(interior {eq.interior_hjb_tol(sol, inst):.3e})")
bad = [k for k, v in eq.invariant_suite(sol, inst).items() if not v["passed"]]
print("invariant violations:", bad or "none")

# %%
# Flat discount for comparison: no time inconsistency, no coupling

flat = eq.solve_equilibrium(inst.replace(discount=model.ExponentialDiscount(0.0)), grid)
gap = np.max(np.abs(flat.V.values - sol.V.values))
print(f"sup |V_hyperbolic - V_flat| = {gap:.3e}")

# %%
# Plot

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    OUT.mkdir(exist_ok=True)
    V = sol.V.forward().values
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    keep = grid.x >= -5
    for j in (0, grid.Nt // 2, grid.Nt - 1):
        ax[0].plot(grid.x[keep], V[keep, j], label=f"t={grid.t[j]:.3f}")
    ax[0].set_xlabel("x")
    ax[0].set_title("V(x, t)")
    ax[0].legend()
    d = sol.d.forward().values
    ax[1].plot(grid.x[keep], d[keep, 0])
    ax[1].set_xlabel("x")
    ax[1].set_title("coupling d(x, 0)")
    fig.tight_layout()
    fig.savefig(OUT / "canonical.png", dpi=120)
    print("wrote", OUT / "canonical.png")
