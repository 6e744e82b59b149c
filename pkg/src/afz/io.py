"""Result bundles and their CSV form.

Numbers are printed with 9 significant digits, lines end with LF and rows
carry no trailing comma. Run metadata lives in ``#`` header lines that
``include_metadata=False`` drops, leaving a byte-reproducible table.
"""
from __future__ import annotations

import datetime as _dt
import math
import os
from dataclasses import dataclass, field
from importlib import metadata as _metadata

import numpy as np

from .errors import IoError
from .waveforms import CHANNELS, WaveformSet

BODE_COLUMNS = ("freq_hz", "mag_db", "phase_deg")
BODE_SIM_COLUMNS = ("sim_mag_db", "sim_phase_deg")


def tool_version() -> str:
    try:
        return _metadata.version("artifact")
    except _metadata.PackageNotFoundError:
        return "0+unknown"


def fmt(x) -> str:
    """Fixed 9-significant-digit rendering; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return f"{x:.9g}"


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: tuple

    def __post_init__(self):
        width = len(self.columns)
        for r in self.rows:
            if len(r) != width:
                raise ValueError(f"row of length {len(r)} under {width} columns")

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(fmt(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"


@dataclass
class ResultBundle:
    """Tables of one run plus metadata and diagnostics."""
    tables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    @classmethod
    def start(cls, config_hash: str = "", timestamp: str | None = None) -> "ResultBundle":
        stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        return cls(metadata={"config_hash": config_hash, "timestamp": stamp,
                             "tool_version": tool_version()})

    def add(self, name: str, table: Table) -> None:
        self.tables[name] = table

    def warn(self, message: str) -> None:
        if message not in self.diagnostics:
            self.diagnostics.append(message)

    def header(self) -> str:
        lines = [f"# {k}: {v}" for k, v in self.metadata.items()]
        lines += [f"# warning: {d}" for d in self.diagnostics]
        return "".join(line + "\n" for line in lines)

    def render(self, name: str, include_metadata: bool = True) -> str:
        body = self.tables[name].to_csv()
        return (self.header() + body) if include_metadata else body


def waveform_table(wf: WaveformSet, channels=CHANNELS) -> Table:
    cols = [wf[c] for c in channels]
    rows = tuple((float(t), *(float(c[i]) for c in cols)) for i, t in enumerate(wf.time))
    return Table(("time_s", *channels), rows)


def event_table(log) -> Table:
    rows = tuple((e.time, e.label, e.mode, e.cause) for e in log.events)
    return Table(("time_s", "interval", "mode", "cause"), rows)


def bode_table(analytical, simulated=None) -> Table:
    """Analytical Bode rows, optionally joined with simulated points at the same frequencies."""
    if simulated is None:
        rows = tuple((r.freq, r.mag_db, r.phase_deg) for r in analytical)
        return Table(BODE_COLUMNS, rows)
    if len(simulated) != len(analytical):
        raise ValueError("simulated and analytical Bode data differ in length")
    rows = tuple((a.freq, a.mag_db, a.phase_deg, s.mag_db, s.phase_deg)
                 for a, s in zip(analytical, simulated))
    return Table(BODE_COLUMNS + BODE_SIM_COLUMNS, rows)


def read_csv(text: str):
    """Inverse of :meth:`Table.to_csv` for numeric tables; ``#`` lines are skipped."""
    lines = [ln for ln in text.split("\n") if ln and not ln.startswith("#")]
    columns = tuple(lines[0].split(","))
    rows = tuple(tuple(float(v) for v in ln.split(",")) for ln in lines[1:])
    return Table(columns, rows)


def emit_csv(bundle: ResultBundle, directory, include_metadata: bool = True,
             prefix: str = "") -> list:
    """Write each table of ``bundle`` to ``<directory>/<prefix><name>.csv``.

    Returns the written paths.
    """
    try:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name in bundle.tables:
            path = os.path.join(directory, f"{prefix}{name}.csv")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(bundle.render(name, include_metadata))
            paths.append(path)
        return paths
    except OSError as exc:
        raise IoError(f"cannot write results to {directory}: {exc}") from exc
