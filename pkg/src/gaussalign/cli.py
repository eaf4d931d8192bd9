"""Command-line entry point: ``gaussalign <subcommand> ...``.

Exit codes: 0 success, 2 usage or validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .align import AlignmentReport, bht_align, map_align, score_alignment, score_matrix, select_threshold
from .errors import ValidationError
from .harness import SweepConfig, read_cells, sweep, _json_default
from .measures import mutual_information, sigma, summarize
from .model import CanonicalModel, CorrelationModel, canonicalize
from .plotting import emit_plot
from .synth import GENERATOR_INFO, derive_trial_seed, sample_instance


class UsageError(Exception):
    pass


def _parse_rho(args) -> CanonicalModel:
    """Resolve ``--model`` / ``--rho`` [``--d``] into a canonical model."""
    if getattr(args, "model", None):
        loaded = fileio.load_model(args.model)
        return canonicalize(loaded)[0] if isinstance(loaded, CorrelationModel) else loaded
    if args.rho is None:
        raise UsageError("--rho (or --model) is required")
    try:
        values = [float(x) for x in args.rho.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--rho: cannot parse {args.rho!r}") from None
    if len(values) == 1 and args.d is not None:
        values = values * args.d
    elif args.d is not None and args.d != len(values):
        raise UsageError(f"--d {args.d} disagrees with {len(values)} values given to --rho")
    return CanonicalModel.from_values(values)


def _load_pair(args):
    """Read both databases, transforming to canonical coordinates when a general model is given."""
    db = fileio.read_databases(args.a, args.b)
    if getattr(args, "model", None):
        loaded = fileio.load_model(args.model)
        if isinstance(loaded, CorrelationModel):
            rho, t_a, t_b = canonicalize(loaded)
            return db.transformed(t_a, t_b), rho
        return db, loaded
    return db, _parse_rho(args)


def _seed(args):
    return derive_trial_seed(args.seed, args.trial) if args.seed is not None else None


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def cmd_generate(args) -> int:
    rho = _parse_rho(args)
    inst = sample_instance(args.n, rho, derive_trial_seed(args.seed, args.trial))
    out = Path(args.out)
    fileio.write_databases(out, inst.databases)
    fileio.write_matching(out / "truth.csv", inst.truth, inst.databases.users_a)
    fileio.save_model(rho, out / "model.json")
    _emit({"out": str(out), "n": args.n, "d": rho.d, "seed": {"master_seed": args.seed, "trial_index": args.trial},
           "generator": GENERATOR_INFO})
    return 0


def cmd_canonicalize(args) -> int:
    loaded = fileio.load_model(args.model)
    rho = canonicalize(loaded, args.drop_tolerance)[0] if isinstance(loaded, CorrelationModel) else loaded
    if args.out:
        fileio.save_model(rho, args.out)
    _emit({"rho": rho.rho.tolist(), "I": mutual_information(rho), "sigma": sigma(rho)})
    return 0


def _finish_report(report: AlignmentReport, db, args) -> int:
    if args.truth:
        truth = fileio.read_matching(args.truth)
        report.truth = truth
        report.false_negatives, report.false_positives, report.exact = score_alignment(report.predicted, truth)
    if args.predicted_out:
        fileio.write_matching(args.predicted_out, report.predicted, db.users_a)
    payload = report.to_dict()
    payload["generator"] = GENERATOR_INFO
    _emit(payload)
    return 0


def cmd_align_map(args) -> int:
    db, rho = _load_pair(args)
    start = time.perf_counter()
    scores = score_matrix(db, rho)
    predicted, weight = map_align(scores)
    report = AlignmentReport("map", predicted, total_score=weight, seed=_seed(args), n=db.n)
    report.wall_time = time.perf_counter() - start
    return _finish_report(report, db, args)


def cmd_align_bht(args) -> int:
    db, rho = _load_pair(args)
    start = time.perf_counter()
    scores = score_matrix(db, rho)
    extra = {}
    if args.tau is not None:
        tau = args.tau
    else:
        window = select_threshold(summarize(rho), db.n, args.eps_fn, args.eps_fp)
        tau = window.midpoint
        extra["window"] = window.to_dict()
    predicted = bht_align(scores, tau)
    total = float(np.sum(scores.scores[scores.scores >= tau]))
    report = AlignmentReport("bht", predicted, total_score=total, threshold=tau, seed=_seed(args), n=db.n, extra=extra)
    report.wall_time = time.perf_counter() - start
    return _finish_report(report, db, args)


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi, *step = (int(x) for x in part.split(":"))
            out.extend(range(lo, hi + 1, step[0] if step else 1))
        elif part:
            out.append(int(part))
    return out


def cmd_sweep(args) -> int:
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    else:
        if args.n is None:
            raise UsageError("--n (or --config) is required")
        cfg = {"n_values": _int_list(args.n)}
        if args.model:
            cfg["model"] = args.model
        elif args.rho is not None and args.d is not None:
            cfg["rho"] = float(args.rho)
            cfg["d_values"] = _int_list(args.d)
        elif args.rho is not None:
            cfg["rho_vector"] = [float(x) for x in args.rho.split(",")]
        if args.tau_grid:
            cfg["tau_policy"], cfg["tau_grid"] = "grid", [float(x) for x in args.tau_grid.split(",")]
        elif args.tau is not None:
            cfg["tau_policy"], cfg["tau"] = "explicit", args.tau
    for key, val in (("algorithm", args.algorithm), ("trials", args.trials), ("master_seed", args.seed),
                     ("out_dir", args.out), ("threads", args.threads), ("eps_fn", args.eps_fn),
                     ("eps_fp", args.eps_fp)):
        if val is not None:
            cfg[key] = val
    try:
        config = SweepConfig(**cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep configuration: {exc}") from None
    cells = sweep(config)
    _emit({"out_dir": config.out_dir, "cells": len(cells)})
    return 0


def cmd_report(args) -> int:
    cells = read_cells(args.cells)
    out = Path(args.out) if args.out else Path(args.cells).parent
    out.mkdir(parents=True, exist_ok=True)
    kinds = [args.kind] if args.kind else ["success-vs-I", "errors-vs-I"]
    written = []
    for kind in kinds:
        if kind == "success-vs-I" and not any(c.map_success_rate is not None for c in cells):
            continue
        if kind == "errors-vs-I" and not any(c.bht_mean_fn is not None for c in cells):
            continue
        name = "plot.svg" if not written else "plot_errors.svg"
        written.append(str(emit_plot(cells, kind, out / name)))
    _emit({"plots": written})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaussalign", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp, d_as_list=False):
        sp.add_argument("--rho", help="constant correlation (with --d) or comma-separated vector")
        sp.add_argument("--d", type=str if d_as_list else int, help="number of coordinates" + (" (list or lo:hi:step)" if d_as_list else ""))
        sp.add_argument("--model", help="general or canonical model JSON")

    def seed_flags(sp, required=False):
        sp.add_argument("--seed", type=int, required=required, help="64-bit master seed")
        sp.add_argument("--trial", type=int, default=0, help="trial index (default 0)")

    g = sub.add_parser("generate", help="sample a planted database pair")
    g.add_argument("--n", type=int, required=True)
    model_flags(g)
    seed_flags(g, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("canonicalize", help="reduce a general model to canonical correlations")
    c.add_argument("--model", required=True)
    c.add_argument("--drop-tolerance", type=float, default=1e-10)
    c.add_argument("--out")
    c.set_defaults(func=cmd_canonicalize)

    for name, func in (("align-map", cmd_align_map), ("align-bht", cmd_align_bht)):
        a = sub.add_parser(name, help=f"{name.split('-')[1].upper()} alignment of two database CSVs")
        a.add_argument("--a", required=True)
        a.add_argument("--b", required=True)
        model_flags(a)
        a.add_argument("--truth")
        a.add_argument("--predicted-out", help="write the predicted matching as u,v CSV")
        seed_flags(a)
        if name == "align-bht":
            a.add_argument("--tau", type=float)
            a.add_argument("--eps-fn", type=float, default=1.0)
            a.add_argument("--eps-fp", type=float, default=1.0)
        a.set_defaults(func=func)

    s = sub.add_parser("sweep", help="run a phase-transition sweep")
    s.add_argument("--config", help="JSON file mirroring SweepConfig")
    s.add_argument("--n", help="comma list or lo:hi:step")
    model_flags(s, d_as_list=True)
    s.add_argument("--algorithm", choices=["map", "bht", "both"])
    s.add_argument("--tau", type=float)
    s.add_argument("--tau-grid")
    s.add_argument("--eps-fn", type=float)
    s.add_argument("--eps-fp", type=float)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="render plots from a sweep's cells.csv")
    r.add_argument("--cells", required=True)
    r.add_argument("--out")
    r.add_argument("--kind", choices=["success-vs-I", "errors-vs-I"])
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"gaussalign: validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"gaussalign: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
