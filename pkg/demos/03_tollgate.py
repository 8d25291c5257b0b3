"""A tollgate that forces drivers down to a crawl.

On the window [x1, x2] an external action relaxes the distribution toward an
equilibrium whose prescribed speed falls from v_free to v_gate.  A dense
bump of traffic starts upstream and drives into the gate.  The run writes the
same files as ``kintraffic simulate`` to the directory given on the command
line (default: ./tollgate_out).
"""

import json
import sys
from pathlib import Path

import numpy as np

from kintraffic.harness import build_scenario, parse_config, write_f_snapshot, write_macro_csv
from kintraffic.harness.scenarios import TOLLGATE_PRESET
from kintraffic.solver import run

out = Path(sys.argv[1] if len(sys.argv) > 1 else "tollgate_out")
cfg = parse_config(TOLLGATE_PRESET)
grid, params, f0, action = build_scenario(cfg)
traj = run(f0, grid, params, action, cfg.solver_config(snapshot_every=8))

print("t      rho(gate)  mean_v(gate)  mean_v(upstream)")
gate = int(np.argmin(np.abs(grid.x - 0.54)))
up = int(np.argmin(np.abs(grid.x - 0.30)))
for t, m in zip(traj.times, traj.macros):
    print(f"{t:5.3f}  {m.rho[gate]:9.5f}  {m.mean_v[gate]:12.5f}  {m.mean_v[up]:16.5f}")

m = traj.macros[-1]
print("\nDensity profile at the final time:")
for ix in range(0, grid.n_x, 4):
    print(f"   x={grid.x[ix]:.3f} rho={m.rho[ix]:.4f} " + "*" * int(80 * m.rho[ix]))

out.mkdir(parents=True, exist_ok=True)
write_macro_csv(traj, out / "macro.csv")
write_f_snapshot(traj.final, out / "f_final.txt", traj.times[-1])
(out / "ledger.json").write_text(json.dumps({"ledger": traj.ledger, "blowup": traj.blowup}, indent=2) + "\n")
print(f"\nwrote results to {out}/")
# relaxation toward f_e exchanges vehicles with the outside, so mass is not conserved
print(f"mass {traj.ledger[0]['mass']:.10f} -> {traj.ledger[-1]['mass']:.10f}")
