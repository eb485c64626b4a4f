"""Command line pipeline: tensor -> kernel -> solve.

Each stage reads one JSON config, writes JSON/CSV/VTK artifacts into the
output directory, and isolates timestamps and wall times in meta.json so
payload files stay byte-comparable between identical runs.  Exit codes:
0 success, 2 usage or config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import datetime
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cell as cell_mod, kernel as kernel_mod, macro, mesh as msh, output
from .errors import ConvergenceError, HomogError

DEFAULT_CONFIG: dict = {
    "cell": {"a": 0.4, "b": 0.2, "angle_deg": 30.0, "d1": 1.0, "d2": 1.0},
    "mesh": {
        "mode": "builtin",
        "h": 0.02,
        "n_arc": 256,
        "msh_path": None,
        "subdomain_tags": None,
        "boundary_tags": None,
    },
    "kernel": {
        "m": 100,
        "epsilon": 1e-5,
        "fold_rho": False,
        "mesh": {"mode": "inclusion", "h": 0.00625, "n_arc": 384},
    },
    "macro": {
        "n": 100,
        "tau": 1e-4,
        "sigma": 1.0,
        "t_end": 0.1,
        "snapshot_times": [0.0, 0.05, 0.1],
        "u0": "paper",
        "tensor_path": None,
        "kernel_path": None,
    },
    "output": {"directory": "out", "formats": ["vtk", "csv"], "write_correctors": False},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_set(expr: str):
    if "=" not in expr:
        raise ValueError(f"--set expects key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_set(config: dict, key: str, value) -> None:
    parts = key.split(".")
    node = config
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ValueError(f"--set path {key!r} does not exist in the config")
        node = node[part]
    if parts[-1] not in node:
        raise ValueError(f"--set path {key!r} does not exist in the config")
    node[parts[-1]] = value


def load_config(path, overrides=()) -> dict:
    with open(path) as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"config is not valid JSON: {err}") from err
    if not isinstance(user, dict):
        raise ValueError("config root must be a JSON object")
    unknown = set(user) - set(DEFAULT_CONFIG)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    config = _deep_merge(DEFAULT_CONFIG, user)
    for expr in overrides:
        key, value = _parse_set(expr)
        _apply_set(config, key, value)
    return config


def _geometry(config: dict) -> msh.CellGeometry:
    c = config["cell"]
    return msh.CellGeometry(
        a=float(c["a"]), b=float(c["b"]), angle_deg=float(c["angle_deg"]),
        d1=float(c["d1"]), d2=float(c["d2"]),
    )


def _cell_mesh(config: dict, geom: msh.CellGeometry) -> msh.TriMesh:
    mc = config["mesh"]
    if mc["mode"] == "builtin":
        mesh = msh.build_cell_mesh(geom, h=float(mc["h"]), n_arc=int(mc["n_arc"]))
    elif mc["mode"] == "msh":
        if not mc["msh_path"]:
            raise ValueError("mesh.mode 'msh' requires mesh.msh_path")
        sub_map = {int(k): v for k, v in (mc["subdomain_tags"] or {}).items()} or None
        bnd_map = {int(k): v for k, v in (mc["boundary_tags"] or {}).items()} or None
        mesh = msh.read_msh(mc["msh_path"], subdomain_map=sub_map, boundary_map=bnd_map)
    else:
        raise ValueError(f"unknown mesh.mode {mc['mode']!r}")
    return msh.periodic_pairs(mesh)


def _resolve_u0(selector):
    if selector == "paper":
        return lambda x1, x2: (
            4.0 / (1.0 + np.exp(-100.0 * (x1 - 0.5))) * x1 * (1.0 - x1)
            * np.sin(np.pi * x2)
        )
    if selector == "zero":
        return lambda x1, x2: np.zeros_like(np.asarray(x1, dtype=float))
    if isinstance(selector, dict) and "expression" in selector:
        expr = selector["expression"]
        names = {k: getattr(np, k) for k in (
            "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "pi", "e",
            "tanh", "cosh", "sinh", "where", "minimum", "maximum",
        )}
        code = compile(expr, "<u0-expression>", "eval")

        def u0(x1, x2):
            scope = dict(names)
            scope.update({"x1": x1, "x2": x2})
            return np.broadcast_to(
                np.asarray(eval(code, {"__builtins__": {}}, scope), dtype=float),
                np.asarray(x1).shape,
            ).copy()

        return u0
    raise ValueError(f"unsupported u0 selector {selector!r}")


def _would_write(command: str, config: dict) -> list[str]:
    if command == "tensor":
        files = ["tensor.json"]
        if config["output"]["write_correctors"]:
            files += ["corrector_1.csv", "corrector_2.csv"]
        return files
    if command == "kernel":
        return ["kernel.json", "kernel_samples.csv"]
    if command == "solve":
        files = ["summary.json", "energy.csv"]
        fmts = config["output"]["formats"]
        for t_req in config["macro"]["snapshot_times"]:
            lvl = int(round(float(t_req) / float(config["macro"]["tau"])))
            stem = f"snapshot_{lvl:06d}"
            files += [f"{stem}.{ext}" for ext in ("vtk", "csv") if ext in fmts]
        return files
    raise ValueError(f"unknown command {command!r}")


def _check_output_dir(outdir: Path, command: str, config: dict, force: bool):
    if command == "pipeline":
        names = (_would_write("tensor", config) + _would_write("kernel", config)
                 + _would_write("solve", config))
    else:
        names = _would_write(command, config)
    clashes = [n for n in names if (outdir / n).exists()]
    if clashes and not force:
        raise FileExistsError(
            f"output files exist in {outdir} (rerun with --force): {clashes[:4]}"
        )
    outdir.mkdir(parents=True, exist_ok=True)


def _update_meta(outdir: Path, stage: str, wall: float, threads) -> None:
    meta_path = outdir / "meta.json"
    meta = {}
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    meta.setdefault("tool", "homogmem")
    meta["version"] = __version__
    meta["threads"] = threads
    meta.setdefault("stages", {})
    meta["stages"][stage] = {
        "wall_time_s": wall,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _dump_json(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_tensor(config: dict, outdir: Path) -> dict:
    geom = _geometry(config)
    mesh = _cell_mesh(config, geom)
    correctors = cell_mod.solve_correctors(mesh, geom)
    result = cell_mod.effective_tensor(correctors, geom)
    payload = {
        "d": result.tensor.tolist(),
        "asymmetry": result.asymmetry,
        "y1_measure": result.y1_measure,
        "y2_measure": mesh.subdomain_measure(msh.Y2),
        "multipliers": [c.multiplier for c in correctors.components],
        "residuals": [c.residual for c in correctors.components],
        "mesh": {"n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles},
        "geometry": {
            "a": geom.a, "b": geom.b, "angle_deg": geom.angle_deg,
            "d1": geom.d1, "d2": geom.d2,
        },
    }
    _dump_json(payload, outdir / "tensor.json")
    if config["output"]["write_correctors"]:
        for comp in correctors.components:
            output.write_snapshot_csv(
                correctors.mesh, comp.theta,
                outdir / f"corrector_{comp.direction}.csv", name="theta",
            )
    return payload


def cmd_kernel(config: dict, outdir: Path) -> dict:
    geom = _geometry(config)
    kc = config["kernel"]
    kmesh = kc["mesh"]
    if kmesh["mode"] == "inclusion":
        mesh = msh.build_inclusion_mesh(
            geom, h=float(kmesh["h"]), n_arc=int(kmesh["n_arc"])
        )
    elif kmesh["mode"] == "cell":
        mesh = _cell_mesh(config, geom)
    else:
        raise ValueError(f"unknown kernel.mesh.mode {kmesh['mode']!r}")
    raw = kernel_mod.build_kernel(mesh, geom, int(kc["m"]))
    filtered = kernel_mod.filter_kernel(
        raw, float(kc["epsilon"]), fold=bool(kc["fold_rho"])
    )
    kernel_mod.save_kernel_json(filtered, outdir / "kernel.json")
    if filtered.rates.size:
        t_hi = 20.0 / filtered.rates.min()
        t_lo = 1e-4 / filtered.rates.max()
        ts = np.concatenate([[0.0], np.geomspace(t_lo, t_hi, 200)])
    else:
        ts = np.linspace(0.0, 1.0, 201)
    output.write_series_csv(
        outdir / "kernel_samples.csv",
        {"t": ts, "chi": np.atleast_1d(kernel_mod.eval_kernel(filtered, ts))},
    )
    return kernel_mod.kernel_to_json(filtered)


def cmd_solve(config: dict, outdir: Path) -> dict:
    mac = config["macro"]
    tensor_path = Path(mac["tensor_path"] or outdir / "tensor.json")
    kernel_path = Path(mac["kernel_path"] or outdir / "kernel.json")
    if not tensor_path.exists():
        raise FileNotFoundError(f"effective tensor not found at {tensor_path}")
    if not kernel_path.exists():
        raise FileNotFoundError(f"kernel not found at {kernel_path}")
    with open(tensor_path) as fh:
        tensor = np.asarray(json.load(fh)["d"], dtype=float)
    ker = kernel_mod.load_kernel_json(kernel_path)

    mesh = msh.build_unit_square_mesh(int(mac["n"]))
    problem = macro.MacroProblem(
        mesh=mesh,
        tensor=tensor,
        kernel=ker,
        u0=_resolve_u0(mac["u0"]),
        tau=float(mac["tau"]),
        t_end=float(mac["t_end"]),
        sigma=float(mac["sigma"]),
    )
    snapshot_times = [float(t) for t in mac["snapshot_times"]]
    result = macro.run(problem, snapshot_times=snapshot_times)

    levels = np.arange(result.times.size)
    output.write_series_csv(
        outdir / "energy.csv",
        {"n": levels, "t": result.times, "energy": result.energies,
         "l2_norm": result.l2_norms},
    )
    fmts = config["output"]["formats"]
    for t_snap, field in result.snapshots:
        lvl = int(round(t_snap / problem.tau))
        if "vtk" in fmts:
            output.write_vtk(mesh, field, outdir / f"snapshot_{lvl:06d}.vtk")
        if "csv" in fmts:
            output.write_snapshot_csv(mesh, field, outdir / f"snapshot_{lvl:06d}.csv")

    warnings_list = []
    if problem.conditionally_stable:
        warnings_list.append(
            f"sigma={problem.sigma} < 1/2 is only conditionally stable"
        )
    summary = {
        "e0": result.initial_energy,
        "e_end": result.final_energy,
        "steps": problem.n_steps,
        "n_dofs": int(result.final.y.shape[0]),
        "sigma": problem.sigma,
        "tau": problem.tau,
        "t_end": problem.t_end,
        "energy_monotone": bool(
            np.all(np.diff(result.energies)
                   <= 1e-12 * max(result.initial_energy, 1e-300))
        ),
        "warnings": warnings_list,
    }
    _dump_json(summary, outdir / "summary.json")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homogmem",
        description="Three-stage homogenization pipeline for diffusion with memory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("tensor", "solve the periodic cell problems and write tensor.json"),
        ("kernel", "solve the inclusion eigenproblem and write kernel.json"),
        ("solve", "run the macroscale time stepping"),
        ("pipeline", "tensor, kernel, and solve in sequence"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing artifacts")
        p.add_argument("--threads", type=int, default=None,
                       help="cap BLAS worker threads")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path config override, value parsed as JSON")
    return parser


def _limit_threads(threads):
    if threads is None:
        return None
    if threads < 1:
        raise ValueError(f"--threads must be >= 1, got {threads}")
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=threads)
        return threads
    except ImportError:
        return threads


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, overrides=args.set)
        if args.out is not None:
            config["output"]["directory"] = args.out
        threads = _limit_threads(args.threads)
        outdir = Path(config["output"]["directory"])
        _check_output_dir(outdir, args.command, config, args.force)

        stages = (
            ["tensor", "kernel", "solve"] if args.command == "pipeline"
            else [args.command]
        )
        runners = {"tensor": cmd_tensor, "kernel": cmd_kernel, "solve": cmd_solve}
        for stage in stages:
            start = time.perf_counter()
            runners[stage](config, outdir)
            _update_meta(outdir, stage, time.perf_counter() - start, threads)
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (HomogError, ValueError, KeyError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
