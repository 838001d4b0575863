"""Command line entry point: ``fatcurve <group> <action> [options]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from . import arc, estimates, functions, jordan, surface, whitney
from .arc import DomainError, fraction_str

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    command: str = ""
    depth: int = 3
    eval_depth: int = functions.DEFAULT_DEPTH
    epsilons: list = field(default_factory=lambda: [0.5, 0.25, 0.1])
    budget: int | None = None
    pairs: int | None = None
    seed: int = estimates.DEFAULT_SEED
    h_min: float = whitney.DEFAULT_H_MIN
    connector_step: str = "1/512"
    radius: float = surface.DEFAULT_RADIUS
    mesh_step: float = surface.DEFAULT_STEP
    fd_step: float = surface.DEFAULT_FD_STEP
    scale: float = 1.0
    threads: int = 1
    outputs: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise DomainError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _summary(cfg: RunConfig, result: dict, started: float) -> dict:
    return {
        "config": asdict(cfg),
        "input_hash": cfg.digest(),
        "result": result,
        "timestamp": {"finished": time.strftime("%Y-%m-%dT%H:%M:%S"), "seconds": round(time.time() - started, 3)},
    }


def _write(path, text, binary=False):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        p.write_bytes(text)
    else:
        p.write_text(text)
    return str(p)


def _emit(cfg: RunConfig, summary: dict):
    text = json.dumps(summary, indent=1, sort_keys=True, default=str)
    out = cfg.outputs.get("summary")
    if out:
        _write(out, text + "\n")
    print(text)


def _parse_point(text: str, tail: str):
    text = text.strip()
    if text and text[0] in "AB":
        tail = arc.ZEROS if text[0] == "A" else arc.THREES
        text = text[1:]
    digits = tuple(int(c) for c in text)
    if any(d > 3 for d in digits):
        raise DomainError(f"address digits must be 0..3: {text}")
    return arc.CantorPoint(digits, tail)


def _jets(cfg: RunConfig):
    step = Fraction(cfg.connector_step) if cfg.connector_step else None
    return jordan.sample_jet_field(cfg.depth, connector_step=step)


def _extension(cfg: RunConfig):
    jets = _jets(cfg)
    return jets, whitney.ExtensionFn.from_jets(jets, h_min=cfg.h_min)


def _mesh(cfg: RunConfig):
    jets, ext = _extension(cfg)
    pts, *_ = jets.arrays()
    mesh = surface.build_sphere(ext, pts, radius=cfg.radius, step=cfg.mesh_step)
    if cfg.scale != 1.0:
        mesh = surface.contact_scale(mesh, cfg.scale)
    return jets, mesh


# ---------------------------------------------------------------------------
# commands; each returns (result dict, exit code)


def cmd_arc_build(cfg):
    tree = arc.build_tree(cfg.depth)
    res = {"depth": cfg.depth, "nodes": sum(4**k for k in range(cfg.depth + 1)), "denominator": tree.denom}
    if "tree" in cfg.outputs:
        res["tree"] = _write(cfg.outputs["tree"], arc.tree_json(tree))
    return res, EXIT_OK


def cmd_arc_render(cfg):
    tree = arc.build_tree(cfg.depth)
    path = cfg.outputs.get("svg", f"arc_{cfg.depth}.svg")
    return {"svg": _write(path, arc.render_svg(tree, cfg.depth))}, EXIT_OK


def cmd_fn_eval(cfg, address: str, tail: str, fn: str):
    p = _parse_point(address, tail)
    n = cfg.eval_depth
    res = {"point": str(p), "depth": n}
    if fn in ("G", "all"):
        v = functions.G_at(p, n)
        res["G"] = {"value": fraction_str(v.value), "error_bound": fraction_str(v.error_bound)}
    if fn in ("H", "all"):
        res["H"] = fraction_str(functions.H_at(p))
    if fn in ("F", "all"):
        v = functions.F_at(p, n)
        res["F"] = {"value": fraction_str(v.value), "error_bound": fraction_str(v.error_bound)}
    if "csv" in cfg.outputs:
        res["csv"] = _write(cfg.outputs["csv"], functions.csv_rows([p], n))
    return res, EXIT_OK


def _report_result(cfg, rep: estimates.VerificationReport):
    res = rep.to_dict(with_runtime=False)
    code = EXIT_OK if rep.passed else EXIT_VIOLATION
    if not rep.passed:
        path = cfg.outputs.get("witness", f"witness_{rep.check}.json")
        res["witness_path"] = _write(path, json.dumps(rep.witness, indent=1, default=str))
    if "report" in cfg.outputs:
        _write(cfg.outputs["report"], rep.to_json(with_runtime=False))
    return res, code


def cmd_verify_lemma1(cfg, m: int, exploratory: bool):
    rep = estimates.check_lemma1(cfg.depth, m, budget=cfg.budget, seed=cfg.seed, exploratory=exploratory)
    return _report_result(cfg, rep)


def cmd_verify_separation(cfg):
    rep = estimates.check_separation(cfg.depth, pairs=cfg.pairs or 100_000, seed=cfg.seed)
    return _report_result(cfg, rep)


def cmd_verify_holder(cfg, fns):
    rep = estimates.check_holder(fns, cfg.epsilons, pairs=cfg.pairs or 10_000, depth=cfg.eval_depth, seed=cfg.seed)
    res, code = _report_result(cfg, rep)
    if "samples" in cfg.outputs:
        pairs = estimates.sample_anchor_pairs(cfg.eval_depth, cfg.pairs or 10_000, cfg.seed)
        samples = estimates.modulus_samples(pairs, fns[0], cfg.eval_depth)
        res["samples"] = _write(cfg.outputs["samples"], estimates.samples_csv(samples))
    return res, code


def cmd_verify_area(cfg, max_depth: int):
    rows, bad = [], 0
    for n in range(1, max_depth + 1):
        a, closed = arc.area_En(n), arc.area_closed_form(n)
        bad += a != closed
        rows.append({"n": n, "area": fraction_str(a), "closed_form": fraction_str(closed)})
    return {"rows": rows, "violations": bad}, EXIT_VIOLATION if bad else EXIT_OK


def cmd_curve_build(cfg, k):
    curve = jordan.build_Etilde(cfg.depth)
    res = {
        "depth": cfg.depth,
        "endpoints": [[list(map(fraction_str, a)), list(map(fraction_str, b))] for a, b in curve.endpoints()],
        "area": fraction_str(curve.area()),
    }
    if "svg" in cfg.outputs:
        res["svg"] = _write(cfg.outputs["svg"], jordan.render_svg(curve))
    if "jets" in cfg.outputs:
        jets = jordan.sample_jet_field(cfg.depth, k)
        res["jets"] = _write(cfg.outputs["jets"], jets.to_json())
        res["jet_count"] = len(jets)
    return res, EXIT_OK


def cmd_extend_build(cfg):
    jets, ext = _extension(cfg)
    res = {"samples": len(jets), "h_min": cfg.h_min, "floor_level": ext.cover.floor_level}
    if "cover" in cfg.outputs:
        res["cells"] = len(ext.cover)
        res["cover"] = _write(cfg.outputs["cover"], ext.cover.to_json())
    pts, f, *_ = jets.arrays()
    rep = whitney.residual_report(ext, (pts, f), h=cfg.fd_step)
    res["residuals"] = rep.to_dict()
    return res, EXIT_OK


def cmd_extend_sample(cfg, h: float, fmt: str):
    _, ext = _extension(cfg)
    xs, ys, Z = ext.raster(h)
    path = cfg.outputs.get("raster", "raster." + ("csv" if fmt == "csv" else "f32"))
    res = {"dims": [len(ys), len(xs)], "h": h}
    if fmt == "csv":
        res["raster"] = _write(path, whitney.raster_csv(xs, ys, Z))
    else:
        data, header = whitney.raster_binary(xs, ys, Z, h)
        res["raster"] = _write(path, data, binary=True)
        res["header"] = _write(path + ".json", header)
    return res, EXIT_OK


def cmd_mesh_build(cfg):
    jets, mesh = _mesh(cfg)
    res = {
        "vertices": len(mesh.vertices),
        "triangles": len(mesh.triangles),
        "euler": mesh.euler(),
        "watertight": mesh.is_watertight(),
        "curve_vertices": len(mesh.curve),
        "jet_samples": len(jets),
    }
    for key, fn in (("obj", mesh.to_obj), ("ply", mesh.to_ply)):
        if key in cfg.outputs:
            res[key] = _write(cfg.outputs[key], fn())
            res[key + "_sidecar"] = _write(cfg.outputs[key] + ".json", mesh.sidecar())
    return res, EXIT_OK


def cmd_mesh_check(cfg):
    _, mesh = _mesh(cfg)
    records, summ = surface.check_contact(mesh, cfg.fd_step)
    res = {"summary": summ, "face_normals": surface.face_normal_check(mesh)}
    if "csv" in cfg.outputs:
        res["csv"] = _write(cfg.outputs["csv"], surface.records_csv(records))
    return res, EXIT_OK


def cmd_mesh_scale(cfg):
    if not cfg.scale > 0:
        raise DomainError("scale must be positive")
    c = cfg.scale
    cfg.scale = 1.0
    _, mesh = _mesh(cfg)
    cfg.scale = c
    _, before = surface.check_contact(mesh, cfg.fd_step)
    scaled = surface.contact_scale(mesh, c)
    _, after = surface.check_contact(scaled, cfg.fd_step)
    res = {"c": c, "max_before": before["max"], "max_after": after["max"], "ratio_error": abs(after["max"] - c * before["max"])}
    if "obj" in cfg.outputs:
        res["obj"] = _write(cfg.outputs["obj"], scaled.to_obj())
    return res, EXIT_OK


def cmd_report_all(cfg):
    out = Path(cfg.outputs.get("dir", "report"))
    results, code = {}, EXIT_OK
    steps = [
        ("area", lambda: cmd_verify_area(cfg, 8)),
        ("lemma1_m6", lambda: _report_result(cfg, estimates.check_lemma1(8, 6))),
        ("lemma1_m7", lambda: _report_result(cfg, estimates.check_lemma1(8, 7))),
        ("separation", lambda: _report_result(cfg, estimates.check_separation(10, cfg.pairs or 100_000, cfg.seed))),
        (
            "holder",
            lambda: _report_result(
                cfg, estimates.check_holder(["G", "H", "F"], cfg.epsilons, cfg.pairs or 10_000, cfg.eval_depth, cfg.seed)
            ),
        ),
    ]
    cfg.outputs = {"witness": str(out / "witness.json")}
    for name, run in steps:
        res, c = run()
        results[name] = res
        _write(out / f"{name}.json", json.dumps(res, indent=1, sort_keys=True, default=str))
        code = max(code, c)
    tree = arc.build_tree(min(cfg.depth, 6))
    _write(out / "arc.svg", arc.render_svg(tree))
    _write(out / "curve.svg", jordan.render_svg(jordan.build_Etilde(min(cfg.depth, 5))))
    results["files"] = sorted(str(p) for p in out.iterdir())
    return results, code


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig keys")
    p.add_argument("--depth", type=int)
    p.add_argument("--eval-depth", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--eps", help="comma separated epsilons")
    p.add_argument("--h-min", type=float)
    p.add_argument("--connector-step")
    p.add_argument("--radius", type=float)
    p.add_argument("--mesh-step", type=float)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--summary", help="write the JSON summary here too")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fatcurve", description="fractal arc, jets, extension and surface")
    groups = ap.add_subparsers(dest="group", required=True)

    def action(group, name, **kw):
        sub = group.add_parser(name, **kw)
        _common(sub)
        return sub

    g = groups.add_parser("arc").add_subparsers(dest="action", required=True)
    p = action(g, "build")
    p.add_argument("--out", dest="tree")
    p = action(g, "render")
    p.add_argument("--svg")

    g = groups.add_parser("fn").add_subparsers(dest="action", required=True)
    p = action(g, "eval")
    p.add_argument("--address", required=True, help="digits, optionally prefixed by A or B")
    p.add_argument("--tail", choices=["zeros", "threes"], default="threes")
    p.add_argument("--fn", choices=["G", "H", "F", "all"], default="all")
    p.add_argument("--csv")

    g = groups.add_parser("verify").add_subparsers(dest="action", required=True)
    p = action(g, "lemma1")
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--exploratory", action="store_true")
    p.add_argument("--report")
    p.add_argument("--witness")
    p = action(g, "separation")
    p.add_argument("--report")
    p.add_argument("--witness")
    p = action(g, "holder")
    p.add_argument("--fn", default="G,H,F")
    p.add_argument("--report")
    p.add_argument("--witness")
    p.add_argument("--samples", help="CSV of modulus samples for the first function")
    p = action(g, "area")
    p.add_argument("--max-depth", type=int, default=8)

    g = groups.add_parser("curve").add_subparsers(dest="action", required=True)
    p = action(g, "build")
    p.add_argument("--svg")
    p.add_argument("--jets")
    p.add_argument("--k", type=int)

    g = groups.add_parser("extend").add_subparsers(dest="action", required=True)
    p = action(g, "build")
    p.add_argument("--cover")
    p = action(g, "sample")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--format", choices=["csv", "f32"], default="csv")
    p.add_argument("--raster")

    g = groups.add_parser("mesh").add_subparsers(dest="action", required=True)
    p = action(g, "build")
    p.add_argument("--obj")
    p.add_argument("--ply")
    p = action(g, "check-contact")
    p.add_argument("--csv")
    p = action(g, "scale")
    p.add_argument("--c", dest="c", type=float, required=True)
    p.add_argument("--obj")

    g = groups.add_parser("report").add_subparsers(dest="action", required=True)
    p = action(g, "all")
    p.add_argument("--out", dest="dir", default="report")
    return ap


OUTPUT_KEYS = ("tree", "svg", "csv", "report", "witness", "samples", "jets", "cover", "raster", "obj", "ply", "dir", "summary")
DEFAULT_DEPTHS = {"verify lemma1": 8, "verify separation": 10, "extend build": 5, "extend sample": 5, "mesh build": 5, "mesh check-contact": 5, "mesh scale": 5}


def config_from_args(args) -> RunConfig:
    command = f"{args.group} {args.action}"
    cfg = RunConfig.load(args.config) if args.config else RunConfig(depth=DEFAULT_DEPTHS.get(command, 3))
    cfg.command = command
    for name, attr in (
        ("depth", "depth"),
        ("eval_depth", "eval_depth"),
        ("seed", "seed"),
        ("budget", "budget"),
        ("pairs", "pairs"),
        ("h_min", "h_min"),
        ("connector_step", "connector_step"),
        ("radius", "radius"),
        ("mesh_step", "mesh_step"),
        ("fd_step", "fd_step"),
        ("scale", "scale"),
    ):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, attr, v)
    if command == "fn eval" and args.depth is not None:
        cfg.eval_depth = args.depth  # for evaluation the depth is the truncation depth
    if getattr(args, "eps", None):
        cfg.epsilons = [float(e) for e in args.eps.split(",")]
    if getattr(args, "c", None) is not None:
        cfg.scale = args.c
    cfg.threads = int(os.environ.get("FATCURVE_THREADS", cfg.threads))
    outputs = dict(cfg.outputs)
    for key in OUTPUT_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            outputs[key] = v
    cfg.outputs = outputs
    return cfg


def run(cfg: RunConfig, args=None) -> int:
    started = time.time()
    cmd = cfg.command
    table = {
        "arc build": lambda: cmd_arc_build(cfg),
        "arc render": lambda: cmd_arc_render(cfg),
        "fn eval": lambda: cmd_fn_eval(cfg, args.address, args.tail, args.fn),
        "verify lemma1": lambda: cmd_verify_lemma1(cfg, args.m, args.exploratory),
        "verify separation": lambda: cmd_verify_separation(cfg),
        "verify holder": lambda: cmd_verify_holder(cfg, args.fn.split(",")),
        "verify area": lambda: cmd_verify_area(cfg, args.max_depth),
        "curve build": lambda: cmd_curve_build(cfg, args.k),
        "extend build": lambda: cmd_extend_build(cfg),
        "extend sample": lambda: cmd_extend_sample(cfg, args.h, args.format),
        "mesh build": lambda: cmd_mesh_build(cfg),
        "mesh check-contact": lambda: cmd_mesh_check(cfg),
        "mesh scale": lambda: cmd_mesh_scale(cfg),
        "report all": lambda: cmd_report_all(cfg),
    }
    result, code = table[cmd]()
    _emit(cfg, _summary(cfg, result, started))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg, args)
    except (DomainError, estimates.HypothesisError, ValueError) as exc:
        print(f"fatcurve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except arc.ResourceError as exc:
        print(f"fatcurve: resource limit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
