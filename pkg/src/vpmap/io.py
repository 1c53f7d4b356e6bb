"""CSV and JSON readers and writers. Floats are written with 17 significant
digits so every value parses back to the same double."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DatasetError, ParseError
from .inference import PosteriorDraws, VpRow, VpTable
from .model import Dataset, LatentField

FLOAT_FORMAT = ".17g"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), FLOAT_FORMAT)
    return "" if v is None else str(v)


def parse_value(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, rows: Iterable[dict], fieldnames: Optional[Sequence[str]] = None) -> None:
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow([format_value(r.get(k)) for k in fieldnames])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{k: parse_value(v) for k, v in row.items()} for row in csv.DictReader(f)]


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

DATA_COLUMNS = ("time", "area", "y", "exposure")


def read_dataset(path, n2: int, family: str = "binomial", n1: Optional[int] = None) -> Dataset:
    """Counts CSV with columns ``time,area,y,exposure`` (1-based indices).

    Cells absent from the file, or with an empty ``y``, are unobserved.
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in DATA_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"missing columns {missing}", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t, a = int(row["time"]), int(row["area"])
            except (TypeError, ValueError):
                raise ParseError(f"time and area must be integers: {row}", line=lineno) from None
            y_s, e_s = (row["y"] or "").strip(), (row["exposure"] or "").strip()
            try:
                y = float(y_s) if y_s else None
                e = float(e_s) if e_s else None
            except ValueError:
                raise ParseError(f"non-numeric y or exposure: {row}", line=lineno) from None
            rows.append((lineno, t, a, y, e))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    n1 = n1 or max(r[1] for r in rows)
    n = n1 * n2
    y = np.zeros(n)
    e = np.ones(n)
    obs = np.zeros(n, dtype=bool)
    seen = set()
    for lineno, t, a, yv, ev in rows:
        if not (1 <= t <= n1 and 1 <= a <= n2):
            raise DatasetError(f"line {lineno}: cell (time={t}, area={a}) outside 1..{n1} x 1..{n2}")
        if (t, a) in seen:
            raise DatasetError(f"line {lineno}: duplicate cell (time={t}, area={a})")
        seen.add((t, a))
        if yv is None:
            continue
        if ev is None:
            raise DatasetError(f"line {lineno}: observed count without exposure")
        k = (a - 1) * n1 + (t - 1)
        y[k], e[k], obs[k] = yv, ev, True
    return Dataset(y, e, n1, n2, obs, family)


def write_dataset(path, data: Dataset) -> None:
    rows = []
    for k in range(data.n1 * data.n2):
        t, a = k % data.n1 + 1, k // data.n1 + 1
        if data.observed[k]:
            rows.append({"time": t, "area": a, "y": int(data.y[k]), "exposure": data.exposure[k]})
        else:
            rows.append({"time": t, "area": a, "y": None, "exposure": None})
    write_csv(path, rows, DATA_COLUMNS)


# ---------------------------------------------------------------------------
# latent effects
# ---------------------------------------------------------------------------

def write_latent(path, x: LatentField) -> None:
    rows = []
    for name in ("alpha", "beta1", "beta2", "delta", "eps1", "eps2"):
        v = getattr(x, name)
        if v is None:
            continue
        rows.extend({"block": name, "index": i + 1, "value": float(val)} for i, val in enumerate(v))
    write_csv(path, rows, ("block", "index", "value"))


def read_latent(path) -> LatentField:
    blocks: dict[str, dict[int, float]] = {}
    for lineno, row in enumerate(read_csv(path), start=2):
        try:
            blocks.setdefault(str(row["block"]), {})[int(row["index"])] = float(row["value"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"expected columns block,index,value: {row}", line=lineno) from None
    out = {}
    for name, vals in blocks.items():
        n = max(vals)
        if sorted(vals) != list(range(1, n + 1)):
            raise DatasetError(f"block {name}: indices must be 1..{n} without gaps")
        out[name] = np.array([vals[i] for i in range(1, n + 1)])
    if "alpha" not in out:
        out["alpha"] = np.zeros(1)
    try:
        return LatentField(**out)
    except TypeError as exc:
        raise DatasetError(f"unknown or missing latent blocks in {path}: {exc}") from None


# ---------------------------------------------------------------------------
# posterior outputs
# ---------------------------------------------------------------------------

def write_draws(path, draws: PosteriorDraws) -> None:
    fields = ["chain", "iteration", *draws.hyper_names, "loglik"]
    write_csv(path, draws.hyper_rows(), fields)


def read_draws(path) -> dict[str, np.ndarray]:
    rows = read_csv(path)
    if not rows:
        return {}
    return {k: np.array([r[k] for r in rows]) for k in rows[0]}


VP_FIELDS = ("level1", "level2", "estimator", "mean", "q025", "q975")


def write_vp_table(csv_path, json_path, table: VpTable) -> None:
    write_csv(csv_path, table.as_records(), VP_FIELDS)
    write_json(json_path, {"rows": table.as_records(), "notes": table.notes})


def read_vp_table(csv_path) -> VpTable:
    rows = [
        VpRow(str(r["level1"]), str(r["level2"]), str(r["estimator"]),
              float(r["mean"]), float(r["q025"]), float(r["q975"]))
        for r in read_csv(csv_path)
    ]
    return VpTable(rows)


