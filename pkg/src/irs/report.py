"""Training reports and their CSV encoding.

File layout::

    # irs-report 1
    # created: <ISO timestamp>
    # config: <JSON>
    epoch,env_steps,wall_clock_ms,episode_return,eval_return
    0,12,3.25,-4.2,
    ...
    # summary: <JSON>

Everything after the ``# config`` line (the body) is a pure function of the
configuration when a step clock is used.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union

COLUMNS = ("epoch", "env_steps", "wall_clock_ms", "episode_return", "eval_return")
MAGIC = "# irs-report 1"


class WallClock:
    """Milliseconds since construction."""

    name = "wall"

    def __init__(self):
        self._t0 = time.perf_counter()

    def __call__(self, env_steps: int) -> float:
        return round((time.perf_counter() - self._t0) * 1000.0, 3)


class StepClock:
    """Deterministic stand-in: one millisecond per environment step."""

    name = "steps"

    def __call__(self, env_steps: int) -> float:
        return float(env_steps)


def make_clock(name: str):
    if name == "wall":
        return WallClock()
    if name == "steps":
        return StepClock()
    raise ValueError(f"unknown clock {name!r}")


@dataclass
class ReportRow:
    epoch: int
    env_steps: int
    wall_clock_ms: float
    episode_return: float
    eval_return: Optional[float] = None

    def to_csv(self) -> str:
        ev = "" if self.eval_return is None else repr(float(self.eval_return))
        return f"{self.epoch},{self.env_steps},{float(self.wall_clock_ms)!r},{float(self.episode_return)!r},{ev}"

    @classmethod
    def from_csv(cls, line: str) -> "ReportRow":
        parts = line.strip().split(",")
        if len(parts) != len(COLUMNS):
            raise ValueError(f"expected {len(COLUMNS)} columns, got {len(parts)}: {line!r}")
        ev = float(parts[4]) if parts[4] else None
        return cls(int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]), ev)


@dataclass
class TrainingReport:
    header: dict = field(default_factory=dict)
    rows: list[ReportRow] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    created: str = ""

    def evals(self) -> list[ReportRow]:
        return [r for r in self.rows if r.eval_return is not None]

    def first_within(self, reference: float, rel_tol: float = 0.05) -> Optional[ReportRow]:
        """First evaluated row whose eval_return is within ``rel_tol`` of ``reference``."""
        for r in self.evals():
            if within(r.eval_return, reference, rel_tol):
                return r
        return None

    def to_csv(self) -> str:
        buf = [MAGIC, f"# created: {self.created}", f"# config: {json.dumps(self.header, sort_keys=True)}",
               ",".join(COLUMNS)]
        buf += [r.to_csv() for r in self.rows]
        if self.summary:
            buf.append(f"# summary: {json.dumps(self.summary, sort_keys=True)}")
        return "\n".join(buf) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainingReport":
        lines = text.splitlines()
        if not lines or lines[0] != MAGIC:
            raise ValueError("not a training report")
        rep = cls()
        for line in lines[1:]:
            if line.startswith("# created: "):
                rep.created = line[len("# created: "):]
            elif line.startswith("# config: "):
                rep.header = json.loads(line[len("# config: "):])
            elif line.startswith("# summary: "):
                rep.summary = json.loads(line[len("# summary: "):])
            elif line == ",".join(COLUMNS) or not line.strip():
                continue
            else:
                rep.rows.append(ReportRow.from_csv(line))
        return rep

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TrainingReport":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def csv_body(text: str) -> str:
    """The part of a report file after the header block."""
    lines = text.splitlines(keepends=True)
    for k, line in enumerate(lines):
        if line.startswith("# config: "):
            return "".join(lines[k + 1:])
    return text


def within(value: float, reference: float, rel_tol: float = 0.05) -> bool:
    return abs(value - reference) <= rel_tol * abs(reference) + 1e-12


class ReportWriter:
    """Streams a report to disk: header first, rows as they arrive, summary last."""

    def __init__(self, path: Union[str, Path], header: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.report = TrainingReport(header=header, created=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
        self._fh: Optional[IO[str]] = self.path.open("w", encoding="utf-8", newline="\n")
        head = self.report.to_csv()
        self._fh.write(head)
        self._fh.flush()

    def __call__(self, row: ReportRow) -> None:
        self.report.rows.append(row)
        self._fh.write(row.to_csv() + "\n")
        self._fh.flush()

    def close(self, summary: Optional[dict] = None) -> TrainingReport:
        if summary:
            self.report.summary = summary
            self._fh.write(f"# summary: {json.dumps(summary, sort_keys=True)}\n")
        self._fh.close()
        self._fh = None
        return self.report
