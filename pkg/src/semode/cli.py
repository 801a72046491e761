"""Command-line entry point for the whole pipeline."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import BenchConfig, default_config, run_benchmark
from .datasets import Dataset, GENERATORS, generate
from .editing import EditSpec, apply_edits
from .errors import SemodeError
from .fit import FitSettings, LibraryFilters, fit_semantic_model
from .propmap import SemanticModel
from .training import SubmapHyperparams, TuningConfig

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semode", description="Direct semantic modeling of 1-D dynamical systems")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("system", choices=sorted(GENERATORS))
    g.add_argument("--noise", type=float, default=0.01)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=None, help="number of samples (system default)")
    g.add_argument("--out", default="data.csv")
    g.add_argument("--out-domain", action="store_true", help="late observation window (pk only)")

    f = sub.add_parser("fit", help="train a model on a dataset CSV")
    f.add_argument("data")
    f.add_argument("--max-motifs", type=int, default=3)
    f.add_argument("--branches", type=int, default=3)
    f.add_argument("--last-motif", default=None, help="restrict the library, e.g. -+h")
    f.add_argument("--trials", type=int, default=0, help="tuning trials per sub-map (0 = none)")
    f.add_argument("--max-iters", type=int, default=200)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default="model.json")

    pr = sub.add_parser("predict", help="evaluate a trained model at one initial condition")
    pr.add_argument("model")
    pr.add_argument("--x0", type=float, required=True)
    pr.add_argument("--grid", type=int, default=100)
    pr.add_argument("--t-max", type=float, default=None)
    pr.add_argument("--mode", choices=["infer_c2", "train_c0"], default="infer_c2")

    ins = sub.add_parser("inspect", help="emit the full semantic representation as JSON")
    ins.add_argument("model")
    ins.add_argument("--x0-grid", type=int, default=200, help="x0 samples per branch")

    e = sub.add_parser("edit", help="apply an edit spec and refit")
    e.add_argument("model")
    e.add_argument("--edit", required=True, help="EditSpec JSON file")
    e.add_argument("--data", required=True, help="dataset CSV for refitting")
    e.add_argument("--out", default="edited-model.json")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--scratch", action="store_true", help="refit from scratch instead of warm start")

    b = sub.add_parser("bench", help="run the benchmark protocol")
    b.add_argument("system", choices=sorted(GENERATORS))
    b.add_argument("--noise", type=float, default=0.01)
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--json", action="store_true", help="machine-readable output")
    b.add_argument("--out", default=None, help="also write the report to a file")

    s = sub.add_parser("serve", help="run the HTTP service for the companion UI")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--model", default=None)
    s.add_argument("--data", default=None)
    return p


def _cmd_generate(args) -> int:
    kw = {}
    if args.system == "pk" and args.out_domain:
        kw["out_domain"] = True
    ds = generate(args.system, n=args.n, noise=args.noise, seed=args.seed, **kw)
    ds.to_csv(args.out)
    print(f"wrote {sum(len(s.times) for s in ds.samples)} rows ({len(ds)} samples) to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    ds = Dataset.from_csv(args.data)
    settings = FitSettings(
        filters=LibraryFilters(max_motifs=args.max_motifs, last_motif=args.last_motif),
        max_branches=args.branches,
        hyper=SubmapHyperparams(max_iters=args.max_iters, seed=args.seed),
        tuning=TuningConfig(trials=args.trials, seed=args.seed) if args.trials > 0 else None,
        seed=args.seed,
    )
    model = fit_semantic_model(ds, settings)
    model.to_json(args.out)
    branches = ", ".join(str(c) for c in model.comp_map.compositions)
    print(f"fitted {len(model.comp_map.compositions)} branch(es): {branches}")
    print(f"wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = SemanticModel.from_json(args.model)
    t_max = args.t_max if args.t_max is not None else model.config.t_max
    traj = model.predict_trajectory(args.x0, mode=args.mode)
    ts = np.linspace(model.config.t_start, t_max, args.grid)
    xs = traj(ts)
    rep = traj.rep
    print(json.dumps({
        "x0": args.x0,
        "composition": str(rep.composition),
        "status": traj.status,
        "properties": rep.properties.to_dict(),
        "t": [float(v) for v in ts],
        "x": [float(v) for v in xs],
    }, indent=1))
    return 0


def _cmd_inspect(args) -> int:
    model = SemanticModel.from_json(args.model)
    lo, hi = model.comp_map.x_range
    grid = np.linspace(lo, hi, max(args.x0_grid, 2) * len(model.comp_map.compositions))
    out = {
        "version": "semode-model/1",
        "composition_map": model.comp_map.to_dict(),
        "property_curves": model.property_curves(grid),
        "config": model.config.to_dict(),
    }
    print(json.dumps(out, indent=1))
    return 0


def _cmd_edit(args) -> int:
    model = SemanticModel.from_json(args.model)
    with open(args.edit) as fh:
        spec = EditSpec.from_dict(json.load(fh))
    ds = Dataset.from_csv(args.data)
    settings = FitSettings(seed=args.seed)
    edited = apply_edits(model, spec, ds, settings, warm_start=not args.scratch)
    edited.to_json(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_bench(args) -> int:
    config = default_config(args.system, noise=args.noise, trials=args.trials,
                            seeds=tuple(range(args.seeds)))
    report = run_benchmark(config)
    text = report.to_json(include_timing=True) if args.json else report.to_markdown()
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json() if args.out.endswith(".json") else report.to_csv())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import Session, create_app

    session = Session()
    if args.data:
        session.load_dataset(Dataset.from_csv(args.data))
    if args.model:
        session.load_model(SemanticModel.from_json(args.model))
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "inspect": _cmd_inspect,
    "edit": _cmd_edit,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file (field: path)", file=sys.stderr)
        return USAGE_ERROR
    except (SemodeError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
