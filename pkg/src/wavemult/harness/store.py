"""Append-only record store and report emission (JSONL, CSV, plot data)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..sharpness import CASES, ExperimentRecord, SlopeFit, fit_exponent, verdict

CSV_COLUMNS = ("case", "n", "p", "q", "m", "j", "value", "ratio", "slope", "stderr", "r2", "verdict")
OUT_ENV = "WAVEMULT_OUT"


@dataclass(frozen=True)
class CheckRecord:
    """A single pass/fail measurement: ``value <= limit`` (``mode='max'``) or ``>= limit`` (``'min'``)."""

    command: str
    name: str
    value: float
    limit: float
    mode: str = "max"
    n: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        ok = self.value <= self.limit if self.mode == "max" else self.value >= self.limit
        return "PASS" if ok and np.isfinite(self.value) else "FAIL"

    def payload(self) -> dict:
        return json.loads(json.dumps({
            "kind": "check", "command": self.command, "name": self.name, "value": _num(self.value),
            "limit": _num(self.limit), "mode": self.mode, "n": self.n, "metadata": self.metadata,
        }, default=_default))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.payload(), sort_keys=True).encode()).hexdigest()

    def to_json(self) -> str:
        d = self.payload()
        d["digest"] = self.digest()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CheckRecord":
        return cls(d["command"], d["name"], float(d["value"]), float(d["limit"]), d.get("mode", "max"),
                   d.get("n"), d.get("metadata", {}))


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return _num(float(o))
    if isinstance(o, np.ndarray):
        return [_default(x) if not isinstance(x, (int, float)) else x for x in o.tolist()]
    raise TypeError(f"not serializable: {type(o).__name__}")


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "wavemult-out"))


def series_id(case: str, settings: dict) -> str:
    blob = json.dumps({"case": case, **settings}, sort_keys=True, default=_default)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


class RecordStore:
    """JSON-lines file of records; the coordinator is its only writer."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.path = self.directory / "records.jsonl"

    def append(self, records) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")

    def load(self) -> list:
        """Records in file order, duplicates (same digest) dropped."""
        if not self.path.exists():
            return []
        seen, out = set(), []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                rec = CheckRecord.from_dict(d) if d.get("kind") == "check" else ExperimentRecord.from_dict(d)
                dig = rec.digest()
                if dig not in seen:
                    seen.add(dig)
                    out.append(rec)
        return out


# -- summaries ------------------------------------------------------------------


def series_verdict(records, fit: SlopeFit) -> str:
    """Verdict recomputed from the records of one series."""
    r0 = records[0]
    if r0.case in CASES:
        return verdict(r0.case, fit, r0.n, r0.p, r0.q, r0.m)
    meta = r0.metadata
    if "expected" not in meta:
        return "INFO"
    return "PASS" if abs(fit.slope - meta["expected"]) <= meta["tol"] else "FAIL"


def group_series(records) -> dict:
    groups = {}
    for rec in records:
        if isinstance(rec, ExperimentRecord):
            key = (rec.case, rec.metadata.get("series", ""))
            groups.setdefault(key, []).append(rec)
    for key in groups:
        groups[key].sort(key=lambda r: r.j)
    return groups


def _sortnum(v):
    if v is None or v == "":
        return -math.inf
    return float(v)


def summary_rows(records) -> list[dict]:
    """Per-record rows plus one fitted row per series; check records give one row each."""
    rows = []
    for (_, _), recs in group_series(records).items():
        r0 = recs[0]
        for r in recs:
            rows.append({"case": r.case, "n": r.n, "p": r.p, "q": r.q, "m": r.m, "j": r.j, "value": r.value,
                         "ratio": r.ratio, "slope": None, "stderr": None, "r2": None, "verdict": None})
        if len({r.j for r in recs}) >= 3:
            fit = fit_exponent(recs)
            rows.append({"case": r0.case, "n": r0.n, "p": r0.p, "q": r0.q, "m": r0.m, "j": None, "value": None,
                         "ratio": None, "slope": fit.slope, "stderr": fit.stderr,
                         "r2": fit.r2, "verdict": series_verdict(recs, fit)})
    for rec in records:
        if isinstance(rec, CheckRecord):
            rows.append({"case": f"{rec.command}:{rec.name}", "n": rec.n, "p": None, "q": None, "m": None,
                         "j": rec.metadata.get("j"), "value": rec.value, "ratio": None, "slope": None,
                         "stderr": None, "r2": None, "verdict": rec.verdict})
    rows.sort(key=lambda r: (r["case"], _sortnum(r["p"]), _sortnum(r["q"]), _sortnum(r["m"]),
                             math.inf if r["j"] is None else r["j"]))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def write_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def write_plotdata(records, path) -> None:
    """Blocks of ``j log2(ratio)`` per series, separated by blank lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for (case, sid), recs in sorted(group_series(records).items()):
            r0 = recs[0]
            fh.write(f"# case={case} series={sid} n={r0.n} p={_fmt(r0.p)} q={_fmt(r0.q)} m={_fmt(r0.m)}\n")
            for r in recs:
                fh.write(f"{r.j} {float(np.log2(r.ratio))!r}\n")
            fh.write("\n\n")


def read_plotdata(path) -> dict:
    """Parse :func:`write_plotdata` output into ``{header: (js, log2 values)}``."""
    out, head, js, ys = {}, None, [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                head, js, ys = line[1:].strip(), [], []
                out[head] = (js, ys)
            elif line:
                a, b = line.split()
                js.append(int(a))
                ys.append(float(b))
    return out


def emit_report(store: RecordStore, fmt: str = "all", directory=None) -> list[Path]:
    """Write ``summary.csv``, ``plotdata.dat`` and/or a deduplicated ``report.jsonl``."""
    if fmt not in ("csv", "jsonl", "plotdata", "all"):
        raise ValidationError(f"unknown report format {fmt!r}")
    records = store.load()
    if not records:
        raise ValidationError(f"record store {store.path} is empty")
    directory = Path(directory or store.directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "all"):
        write_csv(summary_rows(records), directory / "summary.csv")
        written.append(directory / "summary.csv")
    if fmt in ("plotdata", "all"):
        write_plotdata(records, directory / "plotdata.dat")
        written.append(directory / "plotdata.dat")
    if fmt in ("jsonl", "all"):
        with open(directory / "report.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
        written.append(directory / "report.jsonl")
    return written
