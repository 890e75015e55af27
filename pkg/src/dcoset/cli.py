"""Command-line front end: `coset <command> [options]`."""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import numkernel as nk
from .cartanset import classify_cartan_sets, fundamental_cartan, weyl_group
from .errors import BudgetExhausted, CosetError, MaxItersExceeded, ScenarioError
from .fixtures import EXAMPLES, run_example
from .gradmap import FlowParams, flow_to_closed, in_zero_fiber, phi
from .liegroup import (Scenario, cartan_factor, matrix_from_json, matrix_to_json, random_point,
                       scenario_from_json, validate_scenario)
from .orbitreport import ClassifyParams, classify
from .presets import PRESETS, preset

EXIT_IO = 1
EXIT_SCENARIO = 2
EXIT_EXAMPLE = 3


# ---------------------------------------------------------------------------
# deterministic JSON with 17 significant digits

def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def dumps(obj, indent: int = 0) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag], indent)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number, np.bool_)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# configuration

def parse_tolerances(items: list[str]) -> tuple[dict, dict, dict]:
    """Split KEY=VAL overrides into kernel, classify and flow parameters."""
    kernel, cls, flow = {}, {}, {}
    kernel_keys = {f.name for f in fields(nk.Tolerances)}
    cls_keys = {f.name for f in fields(ClassifyParams)} - {"seed"}
    flow_keys = {f.name for f in fields(FlowParams)}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ScenarioError(f"tolerance override {item!r} is not KEY=VAL")
        try:
            num = float(val)
        except ValueError:
            raise ScenarioError(f"tolerance {key} has non-numeric value {val!r}") from None
        if key in kernel_keys:
            kernel[key] = num
        elif key in cls_keys:
            cls[key] = int(num) if key in ("locate_rounds", "locate_nfev") else num
        elif key in flow_keys:
            flow[key] = int(num) if key in ("max_iters", "invariant_every") else num
        else:
            raise ScenarioError(f"unknown tolerance key {key!r}")
    return kernel, cls, flow


def load_scenario(args) -> Scenario:
    if args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario parse error: {exc}") from exc
        return scenario_from_json(obj)
    return preset(args.preset or "sl2c_sl2r_so2c")


def load_points(args, s: Scenario) -> list:
    """Points from --points (JSON list of matrices or {"points": [...]}) or --random N."""
    if args.points:
        with open(args.points, encoding="utf-8") as fh:
            obj = json.load(fh)
        if isinstance(obj, dict):
            obj = obj.get("points", [])
        try:
            mats = [matrix_from_json(m) for m in obj]
            if any(m.shape != (s.N, s.N) for m in mats):
                raise ValueError(f"points must be {s.N}x{s.N} matrices")
            return [cartan_factor(s, m) for m in mats]
        except CosetError as exc:
            raise ValueError(f"bad point: {exc}") from exc
    rng = np.random.default_rng(args.seed)
    return [random_point(s, rng) for _ in range(args.random)]


def emit(report: dict, out: str | None) -> None:
    text = dumps(report) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands

def cmd_info(s: Scenario, args, params) -> tuple[dict, int]:
    rep = validate_scenario(s)
    out = {"scenario": s.name, "N": s.N, "is_complex": s.is_complex,
           "validation": {"ok": rep.ok, "failures": rep.failures,
                          "checks": [{"name": c.name, "passed": c.passed, "residual": c.residual}
                                     for c in rep.checks]},
           "tau_center_spectrum": [complex(v) for v in rep.tau_center_spectrum],
           "assumption_G_eq_G1_G0_G2": "unchecked"}
    if rep.ok:
        dims = {"g": s.g.dim, "k": s.k.dim, "p": s.p.dim, "center": s.center.dim}
        for j in (1, 2):
            dims[f"g^sigma{j}"] = s.gs(j, 1).dim
            dims[f"g^-sigma{j}"] = s.gs(j, -1).dim
        out["dims"] = dims
        out["product_dim"] = dims["g^sigma1"] + dims["g^sigma2"]
        f = fundamental_cartan(s, args.seed)
        out["fundamental_cartan"] = {"dim_t0": f.t0.dim, "dim_a0": f.a0.dim}
    return out, 0 if rep.ok else EXIT_SCENARIO


def _phi_one(s, x):
    val = phi(s, x)
    return {"point": matrix_to_json(x.value), "beta1": matrix_to_json(val.beta1),
            "beta2": matrix_to_json(val.beta2), "norm": val.norm, "residual": val.residual,
            "in_zero_fiber": in_zero_fiber(s, x)}


def cmd_phi(s, args, params):
    return {"scenario": s.name, "results": [_phi_one(s, x) for x in load_points(args, s)]}, 0


def cmd_flow(s, args, params):
    results = []
    for x in load_points(args, s):
        entry = {"point": matrix_to_json(x.value)}
        try:
            end, trace = flow_to_closed(s, x, params["flow"], keep_points=False)
            entry.update(converged=trace.converged, stalled=trace.stalled,
                         iterations=len(trace.steps) - 1, final_norm=trace.norms[-1],
                         invariant_drift=trace.invariant_drift,
                         final_point=matrix_to_json(end.value), trace_csv=trace.to_csv())
        except MaxItersExceeded as exc:
            entry.update(error=str(exc), converged=False,
                         trace_csv=exc.trace.to_csv() if exc.trace else "")
        results.append(entry)
    return {"scenario": s.name, "flow_params": params["flow"].__dict__, "results": results}, 0


def _classify_one(job):
    s, x, cls_params, kernel = job
    if kernel:
        nk.set_tolerances(**kernel)
    table = classify_cartan_sets(s, cls_params.seed)
    try:
        return {"verdict": "classified", **classify(s, x, cls_params, table).to_json()}
    except CosetError as exc:
        return {"verdict": "inconclusive", "point": matrix_to_json(x.value),
                "error": f"{type(exc).__name__}: {exc}",
                "diagnostics": getattr(exc, "diagnostics", {})}


def cmd_classify(s, args, params):
    points = load_points(args, s)
    jobs = [(s, x, params["classify"], params["kernel"]) for x in points]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_classify_one, jobs))    # map keeps input order
    else:
        results = [_classify_one(j) for j in jobs]
    return {"scenario": s.name, "seed": args.seed, "results": results}, 0


def _weyl_json(s, C, seed):
    try:
        return weyl_group(s, C, seed=seed).to_json()
    except BudgetExhausted as exc:
        return {"error": str(exc), **(exc.partial.to_json() if exc.partial else {})}


def cmd_cartans(s, args, params):
    table = classify_cartan_sets(s, args.seed)
    classes = []
    for C in table:
        entry = C.to_json()
        entry["weyl_order"] = _weyl_json(s, C, args.seed).get("order")
        classes.append(entry)
    f = fundamental_cartan(s, args.seed)
    return {"scenario": s.name, "fundamental": {"dim_t0": f.t0.dim, "dim_a0": f.a0.dim},
            "classes": classes}, 0


def cmd_weyl(s, args, params):
    table = classify_cartan_sets(s, args.seed)
    chosen = [C for C in table if args.class_id is None or C.class_id == args.class_id]
    if not chosen:
        raise ScenarioError(f"no Cartan class with id {args.class_id}")
    return {"scenario": s.name,
            "classes": [{"class_id": C.class_id, "dims": list(C.dims),
                         "weyl": _weyl_json(s, C, args.seed)} for C in chosen]}, 0


def cmd_example(s, args, params):
    report = run_example(args.name, args.seed)
    return report, 0 if report["paper_passed"] else EXIT_EXAMPLE


COMMANDS = {"info": cmd_info, "phi": cmd_phi, "flow": cmd_flow, "classify": cmd_classify,
            "cartans": cmd_cartans, "weyl": cmd_weyl, "example": cmd_example}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario JSON file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VAL")
    common.add_argument("--jobs", type=int, default=1)

    pts = argparse.ArgumentParser(add_help=False)
    pts.add_argument("--points", help="JSON list of N×N matrices ([re, im] pairs)")
    pts.add_argument("--random", type=int, default=0, metavar="N",
                     help="classify N seeded random points when --points is absent")

    parser = argparse.ArgumentParser(prog="coset", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("info", parents=[common])
    for name in ("phi", "flow", "classify"):
        sub.add_parser(name, parents=[common, pts])
    sub.add_parser("cartans", parents=[common])
    weyl = sub.add_parser("weyl", parents=[common])
    weyl.add_argument("--class", dest="class_id", type=int)
    ex = sub.add_parser("example", parents=[common])
    ex.add_argument("name", choices=sorted(EXAMPLES))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        kernel, cls, flow = parse_tolerances(args.tol)
        if kernel:
            nk.set_tolerances(**kernel)
        params = {"kernel": kernel, "classify": replace(ClassifyParams(seed=args.seed), **cls),
                  "flow": replace(FlowParams(), **flow)}
        s = load_scenario(args)
        if args.command not in ("info", "example"):
            rep = validate_scenario(s)
            if not rep.ok:
                raise ScenarioError(f"scenario validation failed: {', '.join(rep.failures)}")
    except ScenarioError as exc:
        emit({"error": str(exc)}, None)
        return EXIT_SCENARIO
    try:
        report, code = COMMANDS[args.command](s, args, params)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        emit({"error": f"I/O failure: {exc}"}, None)
        return EXIT_IO
    except ScenarioError as exc:
        emit({"error": str(exc)}, None)
        return EXIT_SCENARIO
    emit(report, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
