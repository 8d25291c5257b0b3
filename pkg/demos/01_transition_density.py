"""How a single encounter redistributes speed.

A driver at speed v_star meets a vehicle ahead at v_field.  The outcome is a
probability density on [v_m, v_M]: a Gaussian bump around the driver's own
speed mixed with a polynomial that leans toward acceleration or braking.
This script prints both branches, checks that each integrates to one and
shows the discrete row that the collision operator actually uses.
"""

import numpy as np

from kintraffic import GridSpec, transition_density, velocity_bounds
from kintraffic.kernels import integrate_transition_density, transition_row_discrete


def show(label, v_star, v_field, u=1.0, alpha=1.0, rho_p=0.6):
    b = velocity_bounds(v_star, v_field, u, alpha, rho_p, 0.05)
    total, _ = integrate_transition_density(v_star, v_field, u, alpha, rho_p)
    print(f"{label}: v_star={v_star} v_field={v_field} support=[{b.v_m:.4f}, {b.v_M:.4f}] "
          f"integral={total[0]:.12f}")
    for v in np.linspace(b.v_m, b.v_M, 6):
        print(f"   A({v:.3f}) = {float(transition_density(v, v_star, v_field, u, alpha, rho_p)):.6f}")


show("faster leader (acceleration branch)", 0.3, 0.7)
show("slower leader (deceleration branch)", 0.7, 0.3)

print("\nDiscrete row on 16 velocity cells (acceleration example):")
grid = GridSpec(1, 16)
row = transition_row_discrete(0.3, 0.7, 1.0, 1.0, 0.6, grid)
for v, p in zip(grid.v, row):
    if p > 0:
        print(f"   cell v={v:.4f}  probability={p:.6f}  " + "#" * int(60 * p))
print(f"   row sum = {float(sum(row))!r}")

print("\nA bad road (alpha = 0.2) keeps the driver close to the old speed:")
row = transition_row_discrete(0.3, 0.7, 1.0, 0.2, 0.6, grid)
print("   mean outcome", float(row @ grid.v), "versus", float(transition_row_discrete(0.3, 0.7, 1.0, 1.0, 0.6, grid)
                                                              @ grid.v), "on a good road")
