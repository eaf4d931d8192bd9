"""Readers and writers for model JSON, database CSV, and matching CSV files.

Database CSV: header ``id,f1,...,fd``, one row per user.  Matching CSV:
header ``u,v``.  Floats are written with 17 significant digits so a
write/read round trip is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput
from .model import CanonicalModel, CorrelationModel, DatabasePair, Matching


def fmt_float(x: float) -> str:
    return "%.17g" % x


def _finite_json(obj, where):
    def walk(x):
        if isinstance(x, list):
            for y in x:
                walk(y)
        elif isinstance(x, float) and not math.isfinite(x):
            raise NonFiniteInput(f"{where}: non-finite number")

    walk(obj)


def load_model(path) -> CorrelationModel | CanonicalModel:
    """Load either a general model or a canonical ``{"rho": [...]}`` file."""
    obj = json.loads(Path(path).read_text())
    _finite_json(list(obj.values()), str(path))
    if "rho" in obj and "sigma_ab" not in obj:
        return CanonicalModel.from_values(obj["rho"])
    return CorrelationModel.from_dict(obj)


def save_model(model: CorrelationModel | CanonicalModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def write_database(path, users, rows: np.ndarray) -> None:
    rows = np.asarray(rows, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"f{k + 1}" for k in range(rows.shape[1])])
        for uid, row in zip(users, rows):
            w.writerow([uid] + [fmt_float(x) for x in row])


def read_database(path) -> tuple[tuple[str, ...], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise DimensionMismatch(f"{path}: expected header starting with 'id'")
        d = len(header) - 1
        users, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != d + 1:
                raise DimensionMismatch(f"{path}:{lineno}: expected {d + 1} fields, got {len(rec)}")
            users.append(rec[0])
            rows.append([float(x) for x in rec[1:]])
    arr = np.array(rows, dtype=float).reshape(len(rows), d)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{path}: non-finite feature value")
    return tuple(users), arr


def write_databases(out_dir, databases: DatabasePair) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_database(out / "a.csv", databases.users_a, databases.a)
    write_database(out / "b.csv", databases.users_b, databases.b)


def read_databases(path_a, path_b) -> DatabasePair:
    ua, a = read_database(path_a)
    ub, b = read_database(path_b)
    return DatabasePair(ua, ub, a, b)


def write_matching(path, matching: Matching, users_a=None) -> None:
    """Write pairs as ``u,v``; rows follow ``users_a`` order when given."""
    if users_a is not None:
        rank = {u: i for i, u in enumerate(users_a)}
        pairs = sorted(matching.pairs, key=lambda p: (rank.get(p[0], len(rank)), str(p[1])))
    else:
        pairs = matching.sorted_pairs()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v"])
        w.writerows(pairs)


def read_matching(path, bijective: bool = True) -> Matching:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["u", "v"]:
            raise DimensionMismatch(f"{path}: expected header 'u,v'")
        pairs = [tuple(rec) for rec in reader if rec]
    for p in pairs:
        if len(p) != 2:
            raise DimensionMismatch(f"{path}: malformed pair {p!r}")
    return Matching(frozenset(pairs), bijective=bijective)
