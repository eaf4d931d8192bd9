"""Phase-transition experiments: sweep configuration, trials, aggregation, persistence."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .align import (
    AlignmentReport,
    bht_error_counts,
    max_weight_permutation,
    score_alignment,
    score_matrix,
    select_threshold,
)
from .fileio import fmt_float, load_model
from .measures import summarize
from .model import CanonicalModel, CorrelationModel, Matching, canonicalize
from .synth import GENERATOR_INFO, derive_trial_seed, sample_instance
from .theory import bht_converse_bound, map_achievability_margin, map_converse_predicate

log = logging.getLogger(__name__)

ALGORITHMS = ("map", "bht", "both")
TAU_POLICIES = ("midpoint", "explicit", "grid")


@dataclass
class SweepConfig:
    n_values: list[int]
    rho: float | None = None
    d_values: list[int] | None = None
    rho_vector: list[float] | None = None
    model: str | None = None
    algorithm: str = "map"
    tau_policy: str = "midpoint"
    tau: float | None = None
    tau_grid: list[float] | None = None
    eps_fn: float = 1.0
    eps_fp: float = 1.0
    trials: int | None = None
    master_seed: int = 0
    out_dir: str = "sweep_out"
    threads: int = 1
    write_reports: bool = True

    def __post_init__(self):
        if not self.n_values or any(int(n) < 1 for n in self.n_values):
            raise ValueError("n_values must be a non-empty list of positive integers")
        self.n_values = [int(n) for n in self.n_values]
        sources = sum(x is not None for x in (self.rho, self.rho_vector, self.model))
        if sources != 1:
            raise ValueError("give exactly one of rho (with d_values), rho_vector, or model")
        if self.rho is not None and not self.d_values:
            raise ValueError("constant rho needs a non-empty d_values list")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.tau_policy not in TAU_POLICIES:
            raise ValueError(f"tau_policy must be one of {TAU_POLICIES}")
        if self.tau_policy == "explicit" and self.tau is None:
            raise ValueError("explicit tau policy needs tau")
        if self.tau_policy == "grid" and not self.tau_grid:
            raise ValueError("grid tau policy needs a non-empty tau_grid")
        if self.trials is None:
            self.trials = 100 if self.algorithm == "map" else 20
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.eps_fn <= 0 or self.eps_fp <= 0:
            raise ValueError("eps_fn and eps_fp must be positive")

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CellSpec:
    n: int
    rho: CanonicalModel
    algorithm: str
    tau: float | None
    eps_fn: float
    eps_fp: float
    master_seed: int
    rho_const: float | None = None


@dataclass
class SweepCell:
    n: int
    d: int
    rho: str
    tau: float | None
    mutual_information: float
    sigma: float
    info_ratio: float
    trials: int
    failed_trials: int
    map_success_rate: float | None
    map_success_halfwidth: float | None
    map_mean_errors: float | None
    bht_mean_fn: float | None
    bht_mean_fn_se: float | None
    bht_mean_fn_halfwidth: float | None
    bht_mean_fp: float | None
    bht_mean_fp_se: float | None
    bht_mean_fp_halfwidth: float | None
    map_verdict: str
    map_margin: float
    map_failure_bound: float | None
    converse_verdict: str | None
    bht_window_feasible: bool
    bht_tau_lower: float
    bht_tau_upper: float
    bht_converse_bound: float | None


CELL_COLUMNS = [f.name for f in fields(SweepCell)]


def _rho_label(rho: CanonicalModel) -> str:
    r = rho.rho
    if r.size and np.all(r == r[0]):
        return fmt_float(float(r[0]))
    return ";".join(fmt_float(float(x)) for x in r)


def cell_models(config: SweepConfig) -> list[tuple[CanonicalModel, float | None]]:
    if config.rho is not None:
        return [(CanonicalModel.constant(config.rho, int(d)), float(config.rho)) for d in config.d_values]
    if config.rho_vector is not None:
        return [(CanonicalModel.from_values(config.rho_vector), None)]
    loaded = load_model(config.model)
    if isinstance(loaded, CorrelationModel):
        loaded = canonicalize(loaded)[0]
    return [(loaded, None)]


def build_cells(config: SweepConfig) -> list[CellSpec]:
    cells = []
    for n in config.n_values:
        for rho, rho_const in cell_models(config):
            if config.algorithm == "map":
                taus = [None]
            elif config.tau_policy == "explicit":
                taus = [float(config.tau)]
            elif config.tau_policy == "grid":
                taus = [float(t) for t in config.tau_grid]
            else:
                taus = [select_threshold(summarize(rho), n, config.eps_fn, config.eps_fp).midpoint]
            for tau in taus:
                cells.append(
                    CellSpec(n, rho, config.algorithm, tau, config.eps_fn, config.eps_fp, config.master_seed, rho_const)
                )
    return cells


def run_trial(cell: CellSpec, trial_index: int) -> dict[str, AlignmentReport]:
    """Sample one planted instance and run the cell's algorithm(s) on it.

    Failures are captured in the report's ``error`` field rather than raised.
    """
    seed = derive_trial_seed(cell.master_seed, trial_index)
    algos = ("map", "bht") if cell.algorithm == "both" else (cell.algorithm,)
    out: dict[str, AlignmentReport] = {}
    try:
        inst = sample_instance(cell.n, cell.rho, seed)
        scores = score_matrix(inst.databases, cell.rho)
    except Exception as exc:  # recorded, not dropped
        log.warning("trial %d failed while sampling: %s", trial_index, exc)
        for a in algos:
            out[a] = AlignmentReport(a, None, seed=seed, n=cell.n, error=f"{type(exc).__name__}: {exc}")
        return out
    db = inst.databases
    for a in algos:
        start = time.perf_counter()
        try:
            if a == "map":
                perm, weight = max_weight_permutation(scores.scores)
                predicted = Matching.from_permutation(db.users_a, db.users_b, perm)
                fn, fp, exact = score_alignment(predicted, inst.truth)
                report = AlignmentReport(
                    "map", predicted, inst.truth, fn, fp, exact, weight, seed=seed, n=cell.n
                )
            else:
                fn, fp = bht_error_counts(scores.scores, cell.tau, inst.perm)
                accepted = scores.scores >= cell.tau
                total = float(np.sum(scores.scores[accepted]))
                report = AlignmentReport(
                    "bht", None, inst.truth, fn, fp, fn == 0 and fp == 0, total, cell.tau, seed=seed, n=cell.n
                )
                report.extra["predicted_size"] = int(np.count_nonzero(accepted))
        except Exception as exc:
            log.warning("trial %d (%s) failed: %s", trial_index, a, exc)
            report = AlignmentReport(a, None, seed=seed, n=cell.n, error=f"{type(exc).__name__}: {exc}")
        report.wall_time = time.perf_counter() - start
        out[a] = report
    return out


def _run_task(task):
    ci, cell, t = task
    return ci, t, run_trial(cell, t)


def _rate_halfwidth(p: float, trials: int) -> float:
    return 1.96 * math.sqrt(p * (1.0 - p) / trials)


def _mean_se_halfwidth(values: Sequence[float]) -> tuple[float, float, float]:
    x = np.asarray(values, dtype=float)
    m = float(np.mean(x))
    if x.size < 2:
        return m, math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size))
    return m, se, float(stats.t.ppf(0.975, x.size - 1) * se)


def aggregate(cell: CellSpec, results: list[dict[str, AlignmentReport]]) -> SweepCell:
    summary = summarize(cell.rho)
    n = cell.n
    log_n = math.log(n) if n > 1 else math.nan
    ach = map_achievability_margin(cell.rho, n)
    conv = map_converse_predicate(cell.rho_const, cell.rho.d, n).verdict if cell.rho_const is not None else None
    window = select_threshold(summary, n, cell.eps_fn, cell.eps_fp)
    failed = sum(any(r.error for r in res.values()) for res in results)

    map_rate = map_hw = map_err = None
    maps = [res["map"] for res in results if "map" in res and not res["map"].error]
    if maps:
        map_rate = sum(bool(r.exact) for r in maps) / len(maps)
        map_hw = _rate_halfwidth(map_rate, len(maps))
        map_err = float(np.mean([r.false_negatives for r in maps]))

    fn_stats = fp_stats = (None, None, None)
    bhts = [res["bht"] for res in results if "bht" in res and not res["bht"].error]
    if bhts:
        fn_stats = _mean_se_halfwidth([r.false_negatives for r in bhts])
        fp_stats = _mean_se_halfwidth([r.false_positives for r in bhts])

    return SweepCell(
        n=n,
        d=cell.rho.d,
        rho=_rho_label(cell.rho),
        tau=cell.tau,
        mutual_information=summary.mutual_information,
        sigma=summary.sigma,
        info_ratio=summary.mutual_information / log_n if n > 1 else math.nan,
        trials=len(results),
        failed_trials=failed,
        map_success_rate=map_rate,
        map_success_halfwidth=map_hw,
        map_mean_errors=map_err,
        bht_mean_fn=fn_stats[0],
        bht_mean_fn_se=fn_stats[1],
        bht_mean_fn_halfwidth=fn_stats[2],
        bht_mean_fp=fp_stats[0],
        bht_mean_fp_se=fp_stats[1],
        bht_mean_fp_halfwidth=fp_stats[2],
        map_verdict=ach.verdict,
        map_margin=ach.margin,
        map_failure_bound=ach.failure_bound,
        converse_verdict=conv,
        bht_window_feasible=window.feasible,
        bht_tau_lower=window.lower,
        bht_tau_upper=window.upper,
        bht_converse_bound=bht_converse_bound(summary.mutual_information, n) if n >= 2 else None,
    )


def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return fmt_float(x)
    return str(x)


def cells_to_csv(cells: Sequence[SweepCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CELL_COLUMNS)
    for c in cells:
        w.writerow([_csv_value(getattr(c, k)) for k in CELL_COLUMNS])
    return buf.getvalue()


def _parse_csv_value(name: str, text: str):
    if text == "":
        return None
    kind = {f.name: f.type for f in fields(SweepCell)}[name]
    if "bool" in kind:
        return text == "true"
    if kind.startswith("int"):
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def read_cells(path) -> list[SweepCell]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CELL_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [SweepCell(**{k: _parse_csv_value(k, row[k]) for k in CELL_COLUMNS}) for row in reader]


def run_cells(cells: Sequence[CellSpec], trials: int, threads: int = 1) -> list[list[dict[str, AlignmentReport]]]:
    """Run every (cell, trial) pair; output order is independent of ``threads``."""
    tasks = [(ci, cell, t) for ci, cell in enumerate(cells) for t in range(trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        raw = [_run_task(t) for t in tasks]
    raw.sort(key=lambda r: (r[0], r[1]))
    grouped: list[list[dict[str, AlignmentReport]]] = [[] for _ in cells]
    for ci, _, res in raw:
        grouped[ci].append(res)
    return grouped


def sweep(config: SweepConfig, write: bool = True) -> list[SweepCell]:
    """Execute all cells x trials, aggregate, and (optionally) persist.

    Outputs in ``config.out_dir``: ``cells.csv``, ``sweep.json`` (config,
    generator provenance, cells), ``reports/*.json`` (per trial) and
    ``plot.svg``.
    """
    specs = build_cells(config)
    grouped = run_cells(specs, config.trials, config.threads)
    cells = [aggregate(spec, res) for spec, res in zip(specs, grouped)]
    if write:
        write_sweep(config, cells, grouped)
    return cells


def write_sweep(config: SweepConfig, cells: Sequence[SweepCell], grouped=None) -> Path:
    from .plotting import emit_plot

    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "cells.csv").write_text(cells_to_csv(cells))
        meta = {"config": config.to_dict(), "generator": GENERATOR_INFO, "cells": [asdict(c) for c in cells]}
        (out / "sweep.json").write_text(json.dumps(meta, indent=2, default=_json_default) + "\n")
        if grouped is not None and config.write_reports:
            rdir = out / "reports"
            rdir.mkdir(exist_ok=True)
            for ci, results in enumerate(grouped):
                for t, res in enumerate(results):
                    payload = {
                        "cell": ci,
                        "generator": GENERATOR_INFO,
                        "reports": {a: r.to_dict(include_pairs=False) for a, r in res.items()},
                    }
                    (rdir / f"cell{ci:03d}_trial{t:04d}.json").write_text(
                        json.dumps(payload, indent=2, default=_json_default) + "\n"
                    )
        if cells:
            primary = "success-vs-I" if config.algorithm in ("map", "both") else "errors-vs-I"
            emit_plot(cells, primary, out / "plot.svg")
            if config.algorithm == "both":
                emit_plot(cells, "errors-vs-I", out / "plot_errors.svg")
    except OSError as exc:
        raise OSError(f"cannot write sweep outputs to {out}: {exc}") from exc
    return out


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")
