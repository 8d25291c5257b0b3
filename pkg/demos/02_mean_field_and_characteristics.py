"""Long-range alignment and the characteristics it bends.

Drivers look ahead a distance alpha*L and adjust toward the speeds they see,
but only for speed gaps below d_c.  A dense slow platoon ahead pulls fast
drivers down.  We freeze that force, trace a few characteristics forward and
watch how the flow compresses phase-space volume through the Jacobian.
"""

import numpy as np

from kintraffic import FrozenForce, GridSpec, ModelParams, backtrace, forward_trace, jacobian_weight

grid = GridSpec(64, 48, 2)
params = ModelParams(alpha=1.0, L=0.2, d_c=0.3)

x = grid.x[:, None, None]
v = grid.v[None, :, None]
# a slow platoon near x = 0.6 inside light, faster background traffic
platoon = np.exp(-((x - 0.6) / 0.05) ** 2) * np.exp(-((v - 0.3) / 0.05) ** 2)
background = 0.2 * np.exp(-((v - 0.6) / 0.1) ** 2)
f = 4.0 * platoon + background
f = f * np.ones(grid.n_u)

force = FrozenForce.from_field(f, grid, params)
print("largest |F| on the grid:", f"{force.max_abs():.4f}")
for xq in (0.40, 0.50, 0.55, 0.70):
    a = force.accel(np.array([xq]), np.array([0.45]), np.array([1.0]))[0]
    print(f"   active driver at x={xq:.2f}, v=0.45: F = {a:+.5f}")

print("\nForward characteristics over t = 1 (active drivers):")
x0 = np.array([0.35, 0.45, 0.50])
v0 = np.array([0.45, 0.45, 0.60])
state, clamps = forward_trace(x0, v0, 1.0, 1.0, force)
for a, b, c, d in zip(x0, v0, state.x, state.v):
    print(f"   ({a:.2f}, {b:.2f}) -> ({c:.4f}, {d:.4f})")
print("   clamp events:", clamps)

print("\nJacobian along a backward trace from (0.55, 0.45):")
foot, path = backtrace(np.array([0.55]), np.array([0.45]), 1.0, 0.5, force, n_sub=8, return_path=True)
weights = jacobian_weight(path, 1.0, 0.5 / 8, force)
for k in (0, 4, 8):
    print(f"   J(t - {k * 0.5 / 8:.4f}, t) = {weights[k][0]:.6f}")
print(f"   foot of the characteristic: x={foot.x[0]:.4f}, v={foot.v[0]:.4f}")
