"""Command-line front end.

    gmkeldysh verify      [--config cfg.json] [--out dir] [--samples n] [--seed n]
    gmkeldysh mesh        ...
    gmkeldysh solve       ...
    gmkeldysh convergence ...

Exit codes: 0 pass, 1 check failure or numerical error, 2 usage/config error.
Every command writes ``report.json`` to the output directory.  Outputs are a
function of the config alone.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .coefficients import manufactured_default
from .config import RunConfig, load_config, parse_config
from .errors import ConfigError, GMKError
from .geometry import generate_mesh, write_mesh_csv
from .solver import assemble, convergence_study, l2_norm, solve, source_l2_norm, write_convergence_csv
from .operator import symmetric_source
from .verify import verify

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("gmkeldysh")


def _clean(obj):
    """JSON cannot carry nan/inf; write them as strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_report(out: str, payload: dict) -> str:
    path = os.path.join(out, "report.json")
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_verify(cfg: RunConfig, out: str) -> int:
    s = cfg["sampling"]
    report, sweep = verify(
        cfg.domain,
        cfg.coefficients,
        boundary_samples=s["boundary_samples"],
        interior_samples_count=s["interior_samples"],
        seed=cfg["seed"],
        fillet_split=cfg.fillet_split,
    )
    sweep.to_json(os.path.join(out, "admissibility.json"))
    _write_report(out, {"command": "verify", "config": cfg.raw, **report.as_dict()})
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<42} worst={c.worst_value:.3e}  at={c.location}")
    if not report.passed:
        f = report.first_failure
        print(f"verify failed: {f.name} (worst {f.worst_value:.3e} at {f.location})", file=sys.stderr)
        return EXIT_FAIL
    print("overall: pass")
    return EXIT_PASS


def cmd_mesh(cfg: RunConfig, out: str) -> int:
    m = cfg["mesh"]
    mesh = generate_mesh(cfg.domain, m["n_theta"], m["n_r"])
    paths = write_mesh_csv(mesh, out)
    _write_report(
        out,
        {
            "command": "mesh",
            "config": cfg.raw,
            "n_vertices": mesh.n_vertices,
            "n_triangles": mesh.n_triangles,
            "n_boundary_edges": int(len(mesh.boundary_edges)),
            "area": mesh.area,
            "h": mesh.h,
            "files": [os.path.basename(p) for p in paths],
        },
    )
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.4f}")
    return EXIT_PASS


def cmd_solve(cfg: RunConfig, out: str) -> int:
    """Solve L U = T (f1, f2) with homogeneous boundary data."""
    m, sv = cfg["mesh"], cfg["solver"]
    c = cfg.coefficients
    mesh = generate_mesh(cfg.domain, m["n_theta"], m["n_r"])
    prob = assemble(mesh, c, penalty=sv["lambda"], fillet_split=cfg.fillet_split)
    res = solve(prob, tol=sv["tol"], max_iter=sv["max_iter"], c=c)
    res.solution.to_csv(os.path.join(out, "solution.csv"))
    unorm = l2_norm(res.solution, mesh)
    fnorm = source_l2_norm(lambda x, y: symmetric_source((x, y), c), mesh)
    energy = res.energy_report.as_dict()
    _write_report(
        out,
        {
            "command": "solve",
            "config": cfg.raw,
            "iterations": res.iterations,
            "final_relative_residual": res.residual_history[-1],
            "l2_functional": res.l2_functional,
            "solution_l2": unorm,
            "source_l2": fnorm,
            "energy_report": energy,
            "warnings": prob.gbound_warnings,
        },
    )
    print(f"solve: {res.iterations} iterations, |U_h| = {unorm:.6e}, |F| = {fnorm:.6e}")
    print(
        "energy: volume {volume_term:.6e}  boundary {boundary_term:.6e}  source {source_term:.6e}  defect {defect:.3e}".format(**energy)
    )
    return EXIT_PASS


def cmd_convergence(cfg: RunConfig, out: str) -> int:
    cv, sv = cfg["convergence"], cfg["solver"]
    rows = convergence_study(
        cfg.domain,
        cfg.coefficients,
        manufactured_default(),
        levels=cv["levels"],
        n_theta0=cv["n_theta0"],
        penalty=sv["lambda"],
        tol=sv["tol"],
        max_iter=sv["max_iter"],
        fillet_split=cfg.fillet_split,
    )
    write_convergence_csv(rows, os.path.join(out, "convergence.csv"))
    errors = [r.l2_error for r in rows]
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    _write_report(
        out,
        {
            "command": "convergence",
            "config": cfg.raw,
            "levels": [r.as_dict() for r in rows],
            "l2_error_strictly_decreasing": monotone,
            "finest_over_coarsest": errors[-1] / errors[0] if errors[0] > 0 else 0.0,
        },
    )
    for r in rows:
        print(f"n_theta={r.n_theta:<5d} h={r.h:.4f}  l2_error={r.l2_error:.4e}  energy_defect={r.energy_defect:.3e}  stability={r.stability_ratio:.4f}")
    if not monotone:
        print("convergence failed: l2 error is not strictly decreasing", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_PASS


HELP = {
    "verify": "check every hypothesis of the existence theorem on samples",
    "mesh": "write the triangulation as CSV",
    "solve": "solve with the configured source and homogeneous boundary data",
    "convergence": "manufactured-solution refinement study",
}

COMMANDS = {"verify": cmd_verify, "mesh": cmd_mesh, "solve": cmd_solve, "convergence": cmd_convergence}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmkeldysh", description="Verify and solve the mixed-type boundary value problem.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--samples", type=int, help="override sampling.boundary_samples")
        p.add_argument("--seed", type=int, help="override the random seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.samples is not None:
            overrides["sampling"] = {**cfg["sampling"], "boundary_samples": args.samples}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            cfg = parse_config({**cfg.raw, **overrides})
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, args.out)
    except GMKError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
