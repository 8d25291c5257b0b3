"""Command line: ``simulate``, ``diagram``, ``check`` and ``echo-config``.

Exit codes: 0 success, 1 failed invariant check, 2 invalid configuration,
3 step-size guard violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..solver import GuardError, run
from .checks import check_invariants
from .config import ConfigError, default_config, load_config
from .diagram import fundamental_diagram
from .io import write_f_snapshot, write_macro_csv
from .scenarios import build_scenario

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3


def _dt_arg(text: str):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("dt must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kintraffic", description="Kinetic traffic model solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "run a scenario and write CSV, snapshot and ledger"),
                       ("diagram", "fundamental-diagram sweep of homogeneous runs"),
                       ("check", "run the invariant suite and print a JSON report"),
                       ("echo-config", "print the effective configuration")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON scenario file (defaults apply when omitted)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--mode", choices=("direct", "fixed-point"), help="override solver.mode")
        p.add_argument("--t-end", type=float, help="override solver.t_end")
        p.add_argument("--dt", type=_dt_arg, help="override solver.dt (number or auto)")
    return parser


def _effective(args):
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if args.mode:
        changes["mode"] = args.mode.replace("-", "_")
    if args.t_end is not None:
        changes["t_end"] = args.t_end
    if args.dt is not None:
        changes["dt"] = args.dt
    return cfg.replace("solver", **changes) if changes else cfg


def _simulate(cfg, out: Path):
    grid, params, f0, action = build_scenario(cfg)
    traj = run(f0, grid, params, action, cfg.solver_config())
    out.mkdir(parents=True, exist_ok=True)
    names = cfg.data["output"]
    write_macro_csv(traj, out / names["macro_csv"])
    write_f_snapshot(traj.final, out / names["snapshot"], traj.times[-1])
    ledger = {"ledger": traj.ledger, "blowup": traj.blowup, "diagnostics": traj.diagnostics.as_dict(), **traj.extra}
    (out / names["ledger"]).write_text(json.dumps(ledger, indent=2) + "\n")
    (out / "config.json").write_text(cfg.to_json() + "\n")
    print(f"t_end={traj.times[-1]:.6g} snapshots={len(traj.times)} mass={traj.ledger[-1]['mass']:.12g}")
    return EXIT_OK


def _diagram(cfg, out: Path):
    d = cfg.data["diagram"]
    grid = cfg.grid()
    u_value = float(grid.u[-1])
    rows = fundamental_diagram(cfg.model_params().replace(alpha=float(cfg.model_params().alpha_field(grid).max())),
                               d["densities"], d["t_relax"], n_v=grid.n_v, u_value=u_value,
                               settle_window=d["settle_window"], settle_tol=d["settle_tol"])
    out.mkdir(parents=True, exist_ok=True)
    lines = ["rho,mean_v,flux,settled"]
    lines += ["%.17g,%.17g,%.17g,%d" % (r.rho, r.mean_v, r.flux, r.settled) for r in rows]
    (out / "diagram.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective(args)
        if args.command == "echo-config":
            print(cfg.to_json())
            return EXIT_OK
        if args.command == "check":
            report = check_invariants(cfg)
            print(json.dumps(report, indent=2))
            return EXIT_OK if report["passed"] else EXIT_CHECK
        if args.command == "diagram":
            return _diagram(cfg, args.out)
        return _simulate(cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"step-size guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
