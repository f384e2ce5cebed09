"""Output plumbing: atomic file writes, lossless CSV, and run reports.

CSV numbers are rendered with 17 significant digits, which round-trips
every 64-bit float exactly, so any number a report claims can be
recomputed bit-for-bit from the files it points to.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "write_atomic",
    "format_number",
    "write_csv",
    "read_csv",
    "RunReport",
    "load_report",
    "aggregate_reports",
]


def write_atomic(path, data) -> None:
    """Write bytes or text to path via a temp file and rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        # mkstemp creates 0600 files; restore the umask-respecting default.
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def format_number(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path, header, columns) -> None:
    """Write named columns (equal-length 1-D arrays) as lossless CSV."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if len(cols) != len(header):
        raise ValueError("one header entry per column required")
    if cols and any(c.shape != cols[0].shape for c in cols):
        raise ValueError("columns must share one length")
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(format_number(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv: (header list, dict of columns)."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    header = lines[0].split(",")
    rows = [[float(cell) for cell in line.split(",")] for line in lines[1:]]
    data = np.array(rows) if rows else np.zeros((0, len(header)))
    return header, {name: data[:, i] for i, name in enumerate(header)}


@dataclass
class RunReport:
    """Everything a simulate/compare invocation claims about itself.

    Numeric claims (drifts, envelope) are computed from the same arrays
    the CSVs hold, so re-deriving them from the files reproduces the
    report to the last bit.
    """

    config: dict
    engine: str
    csv_path: str
    norm_drift: float | None = None
    koopmanian_drift: float | None = None
    envelope: dict | None = None
    spectrum_path: str | None = None
    spectrum_summary: str | None = None
    wall_seconds: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "engine": self.engine,
            "csv_path": self.csv_path,
            "norm_drift": self.norm_drift,
            "koopmanian_drift": self.koopmanian_drift,
            "envelope": self.envelope,
            "spectrum_path": self.spectrum_path,
            "spectrum_summary": self.spectrum_summary,
            "wall_seconds": self.wall_seconds,
        }
        out.update(self.extra)
        return out

    def write(self, path) -> None:
        write_atomic(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def aggregate_reports(report_paths) -> tuple[dict, str]:
    """Combine run reports into one JSON dict and a markdown summary."""
    runs = []
    for path in report_paths:
        data = load_report(path)
        data["_source"] = str(path)
        runs.append(data)
    combined = {"runs": runs, "count": len(runs)}

    lines = ["# Run summary", "", f"{len(runs)} run(s) aggregated.", ""]
    lines.append("| engine | mode | k | t_final | norm drift | K drift | envelope degree |")
    lines.append("|---|---|---|---|---|---|---|")
    for data in runs:
        cfg = data.get("config", {})
        env = data.get("envelope") or {}
        lines.append(
            "| {engine} | {mode} | {k} | {t} | {nd} | {kd} | {deg} |".format(
                engine=data.get("engine", "?"),
                mode=cfg.get("mode", "?"),
                k=cfg.get("k", "?"),
                t=cfg.get("t_final", "?"),
                nd=_fmt_opt(data.get("norm_drift")),
                kd=_fmt_opt(data.get("koopmanian_drift")),
                deg=env.get("degree", "-"),
            )
        )
    lines.append("")
    return combined, "\n".join(lines)


def _fmt_opt(value) -> str:
    if value is None:
        return "-"
    return f"{float(value):.3e}"
