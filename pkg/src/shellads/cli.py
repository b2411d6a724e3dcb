"""Command-line interface: generate, evaluate, optimize, check, converge.

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure (identity violation, solver breakdown, invalid mesh).
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import stiffness, voigt
from .errors import ConfigError, MeshError, ShellAdsError
from .geometry import SurfaceGeometry
from .implicit import (
    PerturbationSpec,
    convergence_field,
    extract_mesh,
    perturbed_field,
    project_to_levelset,
    tpms_field,
)
from .materials import lame_from_engineering
from .mesh import load_mesh, mean_element_size, save_obj
from .objectives import ObjectiveSpec
from .optimizer import OptimizeConfig, run
from .remesh import dynamic_remesh


def load_config(path):
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:          # python < 3.11
        import tomli as tomllib
    return tomllib.loads(text.decode())


def _dump_json(obj, path):
    def default(x):
        if isinstance(x, np.ndarray):
            return x.tolist()
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        raise TypeError(type(x))

    Path(path).write_text(json.dumps(obj, indent=2, default=default) + "\n")


def _material(args, cfg):
    mat = cfg.get("material", {})
    young = args.young if args.young is not None else mat.get("young", 1.0)
    poisson = (args.poisson if args.poisson is not None
               else mat.get("poisson", 0.3))
    return lame_from_engineering(young, poisson), young, poisson


def _field_from_args(args):
    if args.sbar and args.sbar > 0:
        return perturbed_field(PerturbationSpec(
            base=args.kind, n_max=args.nbar, strength=args.sbar,
            seed=args.seed))
    return tpms_field(args.kind)


# ----------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    field = _field_from_args(args)
    mesh = extract_mesh(field, args.grid, target_edge=args.target_edge,
                        remesh=not args.no_remesh)
    if args.project:
        mesh = project_to_levelset(mesh, field)
    out = Path(args.output)
    save_obj(mesh, out)
    meta = dict(field.metadata)
    meta.update({
        "grid": args.grid,
        "target_edge": args.target_edge,
        "projected": bool(args.project),
        "vertices": mesh.num_vertices,
        "faces": mesh.num_faces,
        "euler_characteristic": int(mesh.euler_characteristic()),
        "mean_element_size": mean_element_size(mesh),
    })
    _dump_json(meta, str(out) + ".meta.json")
    print(f"wrote {out} (V={mesh.num_vertices}, F={mesh.num_faces}, "
          f"chi={mesh.euler_characteristic()})")
    return 0


def cmd_eval(args):
    cfg = load_config(args.config) if args.config else {}
    lame, young, poisson = _material(args, cfg)
    mesh = load_mesh(args.mesh)
    ev = stiffness.evaluate(mesh, lame, scheme=args.scheme,
                            method=args.solver)
    hydro = np.eye(3) / 3.0
    per_strain = [float(voigt.quadratic_form(ev.CA, e))
                  for e in voigt.unit_strains()]
    r_t, r_s, norm_t, norm_s = stiffness.optimality_residual(
        ev.geo, lame, hydro)
    result = {
        "mesh": str(args.mesh),
        "material": {"young": young, "poisson": poisson},
        "scheme": args.scheme,
        "vertices": mesh.num_vertices,
        "faces": mesh.num_faces,
        "area": ev.area,
        "mean_element_size": mean_element_size(mesh),
        "C_A": ev.CA,
        "membrane_bound_tensor": ev.EM,
        "bulk_modulus": stiffness.bulk_modulus(ev.CA),
        "bulk_bound": lame.bulk_bound,
        "ads_unit_strains": per_strain,
        "solver_residuals": ev.cell.residuals,
        "solver_method": ev.cell.method,
        "hydrostatic_residual_norms": {
            "tangential": norm_t, "scalar": norm_s},
    }
    if args.output:
        _dump_json(result, args.output)
        print(f"wrote {args.output}")
    else:
        _dump_json_stdout(result)
    if args.residual_csv:
        with open(args.residual_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["face", "tangential_x", "tangential_y",
                        "tangential_z", "scalar"])
            for i, (vec, s) in enumerate(zip(r_t, r_s)):
                w.writerow([i, *vec, s])
        print(f"wrote {args.residual_csv}")
    return 0


def _dump_json_stdout(result):
    def default(x):
        if isinstance(x, np.ndarray):
            return x.tolist()
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        raise TypeError(type(x))

    json.dump(result, sys.stdout, indent=2, default=default)
    sys.stdout.write("\n")


def _objective_from_config(cfg):
    obj = dict(cfg.get("objective", {}))
    kind = obj.pop("kind", "bulk")
    kwargs = {}
    if "direction" in obj:
        kwargs["direction"] = np.asarray(obj["direction"], dtype=float)
    if "component" in obj:
        kwargs["component"] = tuple(obj["component"])
    if "strain" in obj:
        kwargs["strain"] = np.asarray(obj["strain"], dtype=float)
    if "weights" in obj:
        kwargs["weights"] = np.asarray(obj["weights"], dtype=float)
    if "c_iso" in obj:
        kwargs["c_iso"] = float(obj["c_iso"])
    return ObjectiveSpec(kind=kind, **kwargs)


def cmd_optimize(args):
    cfg = load_config(args.config) if args.config else {}
    lame, young, poisson = _material(args, cfg)
    spec = _objective_from_config(cfg)
    opt_cfg = OptimizeConfig(**cfg.get("optimizer", {}))
    if args.max_iter is not None:
        opt_cfg.max_iter = args.max_iter
    if args.target_edge is not None:
        opt_cfg.target_edge = args.target_edge

    mesh = load_mesh(args.mesh)
    result = run(mesh, lame, spec, opt_cfg)

    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    save_obj(result.mesh, outdir / "optimized.obj")
    with open(outdir / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "dt", "vertices", "genus",
                    "surgery_regions", "status"])
        for row in result.history:
            w.writerow([row["iteration"], row["objective"], row["dt"],
                        row["vertices"], row["genus"],
                        row["surgery_regions"], row["status"]])
    summary = {
        "material": {"young": young, "poisson": poisson},
        "objective": {"kind": spec.kind, "c_iso": spec.c_iso},
        "config": {k: getattr(opt_cfg, k) for k in vars(opt_cfg)},
        "best_objective": result.best_objective,
        "iterations": len(result.history),
        "converged": result.converged,
        "reason": result.reason,
    }
    _dump_json(summary, outdir / "summary.json")
    print(f"best objective {result.best_objective:.6f} "
          f"({result.reason}); results in {outdir}")
    return 0


def cmd_check(args):
    cfg = load_config(args.config) if args.config else {}
    lame, _, _ = _material(args, cfg)
    mesh = load_mesh(args.mesh)
    failures = 0

    def report(name, ok, detail=""):
        nonlocal failures
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" +
              (f"  ({detail})" if detail else ""))
        if not ok:
            failures += 1

    try:
        mesh.validate()
        report("closed oriented manifold", True)
    except MeshError as exc:
        report("closed oriented manifold", False, str(exc))
        return 3

    ev = stiffness.evaluate(mesh, lame, method=args.solver)
    hydro = np.eye(3) / 3.0
    em_hydro = voigt.quadratic_form(ev.EM, hydro)
    report("hydrostatic membrane constant",
           abs(em_hydro - lame.bulk_bound) < 1e-9,
           f"{em_hydro:.12f} vs {lame.bulk_bound:.12f}")
    eig_sum = float(np.sum(voigt.operator_eigenvalues(ev.EM)))
    expect = 2 * lame.lambda0 + 6 * lame.mu
    report("membrane eigenvalue sum", abs(eig_sum - expect) < 1e-8,
           f"{eig_sum:.10f} vs {expect:.10f}")
    ok = True
    for e in voigt.unit_strains():
        lhs = voigt.quadratic_form(ev.CA, e)
        rhs = voigt.quadratic_form(ev.EM, e)
        ok &= lhs <= rhs + 1e-8
    report("stiffness below membrane bound", ok)
    sym = np.abs(ev.CA - ev.CA.T).max()
    report("tensor symmetry", sym < 1e-7, f"max asym {sym:.2e}")
    print(f"bulk modulus {stiffness.bulk_modulus(ev.CA):.6f} "
          f"(bound {lame.bulk_bound:.6f})")
    return 3 if failures else 0


def cmd_convergence(args):
    field = convergence_field()
    mesh = extract_mesh(field, args.grid)
    lame = lame_from_engineering(args.young or 1.0, args.poisson or 0.3)
    rows = []
    tensors = []
    for k in range(args.levels + 1):
        target = 0.1 * (4.0 / 5.0) ** k
        mesh = dynamic_remesh(mesh, target)
        mesh = project_to_levelset(mesh, field)
        ev = stiffness.evaluate(mesh, lame, method=args.solver)
        h = mean_element_size(mesh)
        tensors.append(ev.CA)
        rows.append({"level": k, "target_edge": target, "h": h,
                     "vertices": mesh.num_vertices,
                     "bulk": stiffness.bulk_modulus(ev.CA)})
        print(f"level {k}: h={h:.5f} V={mesh.num_vertices} "
              f"K_A={rows[-1]['bulk']:.6f}")
    errors = []
    for k in range(len(tensors) - 1):
        err = stiffness.tensor_rel_error(tensors[k + 1], tensors[k])
        errors.append(err)
        rows[k]["successive_error"] = err
        print(f"successive error {k}->{k+1}: {err:.3e}")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["level", "target_edge", "h",
                                               "vertices", "bulk",
                                               "successive_error"])
            w.writeheader()
            for row in rows:
                w.writerow(row)
        print(f"wrote {args.output}")
    decreasing = all(errors[i + 1] < errors[i] for i in range(len(errors) - 1))
    print("successive errors strictly decreasing:", decreasing)
    return 0 if decreasing else 3


# ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(
        prog="shellads",
        description="Asymptotic directional stiffness of periodic "
                    "shell-lattice middle surfaces",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_material(sp):
        sp.add_argument("--young", type=float, default=None)
        sp.add_argument("--poisson", type=float, default=None)
        sp.add_argument("--config", default=None,
                        help="TOML or JSON configuration file")
        sp.add_argument("--solver", default="auto",
                        choices=["auto", "direct", "cg"])

    g = sub.add_parser("gen", help="generate a periodic surface mesh")
    g.add_argument("--kind", default="P", choices=["P", "G", "D", "IWP"])
    g.add_argument("--nbar", type=int, default=1)
    g.add_argument("--sbar", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", type=int, default=128)
    g.add_argument("--target-edge", type=float, default=None)
    g.add_argument("--no-remesh", action="store_true")
    g.add_argument("--project", action="store_true",
                   help="project vertices back onto the level set")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="evaluate the stiffness tensor")
    e.add_argument("mesh")
    e.add_argument("--scheme", default="corrected",
                   choices=["corrected", "uncorrected", "plane_stress"])
    e.add_argument("-o", "--output", default=None)
    e.add_argument("--residual-csv", default=None)
    add_material(e)
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("optimize", help="shape optimization")
    o.add_argument("mesh")
    o.add_argument("-o", "--output", required=True, help="output directory")
    o.add_argument("--max-iter", type=int, default=None)
    o.add_argument("--target-edge", type=float, default=None)
    add_material(o)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("check", help="run the analytic identity suite")
    c.add_argument("mesh")
    add_material(c)
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("convergence",
                       help="h-refinement self-convergence ladder")
    v.add_argument("--grid", type=int, default=64)
    v.add_argument("--levels", type=int, default=4)
    v.add_argument("-o", "--output", default=None)
    add_material(v)
    v.set_defaults(func=cmd_convergence)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ShellAdsError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
