"""Command-line entry points.

Subcommands: ``run`` (episodes from a JSON config), ``sweep`` (vary one
config key), ``instance`` (print an instance and its oracle facts),
``cover`` (build and save a model class), ``verify`` (property suites).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import properties
from .covers import CoverSpec, build_cube_cover, build_layered_class
from .harness import RunConfig, emit_csv, emit_json, run_and_summarize
from .instances import InstanceSpec
from .pricing import best_response, demand, max_revenue, project, revenue


def _out_dir(arg: str | None, config_dir: str | None) -> Path:
    path = Path(arg or os.environ.get("HETPRICING_OUT") or config_dir or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jobs(arg) -> int:
    if arg is not None:
        return int(arg)
    return int(os.environ.get("HETPRICING_JOBS", "1"))


def cmd_run(args) -> int:
    config = RunConfig.load(args.config)
    if args.seed_range:
        lo, hi = (int(x) for x in args.seed_range.split(".."))
        config = RunConfig(config.instance, config.adversary, config.learner,
                           config.T, tuple(range(lo, hi + 1)),
                           config.out_dir, config.invariant_checks)
    if args.check_invariants:
        config = RunConfig(config.instance, config.adversary, config.learner,
                           config.T, config.seeds, config.out_dir, True)
    summary, results = run_and_summarize(config, _jobs(args.jobs))
    out = _out_dir(args.out, config.out_dir)
    stem = Path(args.config).stem
    emit_json(summary, out / f"{stem}_summary.json")
    emit_csv([results[s] for s in sorted(results)], out / f"{stem}_trace.csv")
    final = summary.mean_curve[-1]
    print(f"{stem}: mean final regret {final:.4f} over {len(results)} seeds "
          f"(T={config.T}); wrote {out}/{stem}_summary.json")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        base = json.load(fh)
    key, _, raw_values = args.vary.partition("=")
    values = [json.loads(v) if v[0] in "[{" else float(v)
              for v in raw_values.split(",")]
    out = _out_dir(args.out, (base.get("output") or {}).get("dir"))
    stem = Path(args.config).stem
    for val in values:
        obj = json.loads(json.dumps(base))
        node = obj
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = int(val) if parts[-1] == "T" else val
        config = RunConfig.from_json(obj)
        summary, _ = run_and_summarize(config, _jobs(args.jobs))
        tag = f"{stem}_{key.replace('.', '_')}_{val:g}" \
            if isinstance(val, float) else f"{stem}_{key}_{val}"
        emit_json(summary, out / f"{tag}_summary.json")
        print(f"{key}={val}: mean final regret {summary.mean_curve[-1]:.4f}")
    return 0


def cmd_instance(args) -> int:
    with open(args.spec) as fh:
        spec = InstanceSpec.from_json(json.load(fh))
    dist = spec.build()
    contexts = [np.asarray(c, dtype=float) for c in
                (json.loads(args.contexts) if args.contexts else [])]
    if not contexts:
        e0 = np.zeros(dist.dim)
        e0[0] = 1.0
        contexts = [e0]
    facts = {"instance": dist.to_json(), "contexts": []}
    for u in contexts:
        q = project(dist, u)
        facts["contexts"].append({
            "u": u.tolist(),
            "atoms": q.to_json()["atoms"],
            "demand_at_atoms": [demand(q, v) for v in q.values.tolist()],
            "revenue_at_atoms": [revenue(q, v) for v in q.values.tolist()],
            "best_response": best_response(q),
            "max_revenue": max_revenue(q),
        })
    json.dump(facts, sys.stdout, indent=2)
    print()
    return 0


def cmd_cover(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    if "layered" in spec:
        c = spec["layered"]
        model_class = build_layered_class(d=int(c["d"]), horizon=int(c["T"]),
                                          eps=c.get("eps"), layers=c.get("M"))
    else:
        box = spec.get("theta_box")
        if box is not None:
            box = tuple(tuple(b) for b in box)
        model_class = build_cube_cover(CoverSpec(
            dim=int(spec["dim"]), K=int(spec["K"]), eps=float(spec["eps"]),
            theta_box=box, size_cap=int(spec.get("size_cap", 200_000))))
    model_class.save(args.out)
    print(f"wrote {len(model_class)} models to {args.out}")
    return 0


def cmd_verify(args) -> int:
    failures = 0
    for name, ok, detail in properties.run_all(budget=args.budget):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hetpricing",
        description="Contextual pricing simulations with heterogeneous buyers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config over its seeds")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed-range", help="inclusive range a..b")
    p_run.add_argument("--out")
    p_run.add_argument("--jobs", type=int)
    p_run.add_argument("--check-invariants", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config across one varied key")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--vary", required=True,
                         help="KEY=v1,v2,... (e.g. T=1e3,1e4)")
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--jobs", type=int)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_inst = sub.add_parser("instance", help="print an instance and oracle facts")
    p_inst.add_argument("--spec", required=True)
    p_inst.add_argument("--contexts", help="JSON list of context vectors")
    p_inst.set_defaults(fn=cmd_instance)

    p_cover = sub.add_parser("cover", help="build a model class and save it")
    p_cover.add_argument("--spec", required=True)
    p_cover.add_argument("--out", required=True)
    p_cover.set_defaults(fn=cmd_cover)

    p_verify = sub.add_parser("verify", help="run the property suites")
    p_verify.add_argument("--budget", type=float, default=0.2,
                          help="fraction of the full draw budgets")
    p_verify.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
