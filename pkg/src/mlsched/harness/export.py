"""CSV and JSON export with fixed columns and a summarizer that reads them back.

Every summary the tool prints is computed by :func:`summarize_rows` from the
exported cells, so re-summarizing a written file reproduces it exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping

COLUMNS = {
    "batch": ("job_id", "submit", "deadline_abs", "finish", "violated", "mean_cores"),
    "federation": ("r", "target", "e_r", "s_r", "ac_fit", "ac_eval"),
    "serving": ("service", "window_start", "agg_rt", "violated", "cores"),
}


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r} cannot be exported")
        return f"{value:.9g}"
    return str(value)


def table(kind: str, rows: Iterable[Mapping]) -> list[dict[str, str]]:
    """Rows reduced to the kind's columns, every cell already formatted as text."""
    cols = COLUMNS[kind]
    return [{c: fmt(row.get(c)) for c in cols} for row in rows]


def _num(cell) -> float | None:
    if cell is None or cell == "":
        return None
    return float(cell)


def _flag(cell) -> bool:
    return cell is True or cell == "true"


def _round(x: float | None) -> float | None:
    return None if x is None else float(f"{x:.9g}")


def summarize_rows(kind: str, rows: list[Mapping], threshold: float | None = None) -> dict:
    if kind == "batch":
        jobs = {}
        for r in rows:
            finish, dl, submit = _num(r["finish"]), _num(r["deadline_abs"]), _num(r["submit"])
            jobs[r["job_id"]] = {
                "finish": finish,
                "violated": _flag(r["violated"]),
                "deadline_ratio": _round(finish / dl) if finish is not None else None,
                "budget_ratio": _round((finish - submit) / (dl - submit)) if finish is not None else None,
            }
        cores = [_num(r["mean_cores"]) for r in rows]
        finishes = [j["finish"] for j in jobs.values() if j["finish"] is not None]
        return {
            "jobs": len(rows),
            "violations": sum(j["violated"] for j in jobs.values()),
            "unfinished": sum(j["finish"] is None for j in jobs.values()),
            "makespan": max(finishes) if finishes else None,
            "mean_cores": _round(sum(cores) / len(cores)) if cores else 0.0,
            "per_job": jobs,
        }
    if kind == "federation":
        last = rows[-1]
        out = {
            "rounds": len(rows),
            "epochs": [int(r["e_r"]) for r in rows],
            "total_epochs": int(last["s_r"]),
            "final_ac_fit": _num(last["ac_fit"]),
            "final_ac_eval": _num(last["ac_eval"]),
        }
        if threshold is not None:
            out["ac_sla"] = threshold
            out["reached"] = out["final_ac_eval"] >= threshold
        return out
    if kind == "serving":
        per = {}
        for r in rows:
            s = per.setdefault(r["service"], {"violations": 0, "windows": 0, "cores": []})
            s["windows"] += 1
            s["violations"] += _flag(r["violated"])
            s["cores"].append(_num(r["cores"]))
        mean_cores = sum(sum(s["cores"]) / len(s["cores"]) for s in per.values())
        return {
            "windows": len(rows),
            "violations": sum(s["violations"] for s in per.values()),
            "mean_cores": _round(mean_cores),
            "per_service": {sid: {"violations": s["violations"], "windows": s["windows"]}
                            for sid, s in per.items()},
        }
    raise ValueError(f"unknown kind {kind!r}")


def csv_text(kind: str, rows: list[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS[kind], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _typed(cell: str):
    if cell == "":
        return None
    if cell in ("true", "false"):
        return cell == "true"
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def json_text(obj: Any, sort_keys: bool = True) -> str:
    return json.dumps(obj, indent=2, sort_keys=sort_keys) + "\n"


def rows_json(kind: str, rows: list[Mapping[str, str]]) -> str:
    return json_text({"kind": kind, "columns": list(COLUMNS[kind]),
                      "rows": [{c: _typed(r[c]) for c in COLUMNS[kind]} for r in rows]},
                     sort_keys=False)


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_result(result, out_dir: str | Path, stem: str, fmt_: str = "csv") -> dict[str, Path]:
    """Write the rows (``stem.csv`` or ``stem.json``) and ``stem.summary.json``."""
    out_dir = Path(out_dir)
    cfg = result.scenario
    paths = {}
    if fmt_ == "csv":
        paths["rows"] = out_dir / f"{stem}.csv"
        atomic_write(paths["rows"], csv_text(cfg.kind, result.rows))
    elif fmt_ == "json":
        paths["rows"] = out_dir / f"{stem}.json"
        atomic_write(paths["rows"], rows_json(cfg.kind, result.rows))
    else:
        raise ValueError(f"unknown format {fmt_!r}; valid: csv, json")
    paths["summary"] = out_dir / f"{stem}.summary.json"
    atomic_write(paths["summary"], json_text({
        "scenario": cfg.name, "kind": cfg.kind, "seed": cfg.seed,
        "policy": {"id": cfg.policy.id, "params": cfg.policy.params},
        "summary": result.summary,
    }))
    return paths


def read_rows(path: str | Path) -> tuple[str | None, list[dict]]:
    """Rows of an exported CSV or JSON file; the kind is inferred from the columns."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        return data["kind"], data["rows"]
    reader = csv.DictReader(io.StringIO(text))
    header = tuple(reader.fieldnames or ())
    kind = next((k for k, cols in COLUMNS.items() if cols == header), None)
    return kind, list(reader)


def summarize_file(path: str | Path, threshold: float | None = None) -> dict:
    kind, rows = read_rows(path)
    if kind is None:
        raise ValueError(f"{path}: unrecognised columns")
    return summarize_rows(kind, rows, threshold)
