"""Event logs as multisets of traces, plus CSV and variants-file I/O.

Variants format: one line per distinct trace, ``label,label,...;count``. Labels
follow CSV quoting rules. A line ``;3`` denotes three empty traces.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import EmptyLogError, LogFormatError

log = logging.getLogger(__name__)

Trace = tuple[str, ...]


class EventLog:
    """Immutable multiset of traces."""

    __slots__ = ("_variants", "_size")

    def __init__(self, variants: Mapping[Trace, int] | None = None):
        clean: dict[Trace, int] = {}
        for trace, count in (variants or {}).items():
            if isinstance(count, bool) or not isinstance(count, int) or count < 0:
                raise ValueError(f"multiplicity of {trace!r} must be a non-negative int")
            if count:
                key = tuple(trace)
                clean[key] = clean.get(key, 0) + count
        self._variants = clean
        self._size = sum(clean.values())

    @classmethod
    def from_traces(cls, traces: Iterable[Iterable[str]]) -> EventLog:
        return cls(Counter(tuple(t) for t in traces))

    @property
    def variants(self) -> dict[Trace, int]:
        return dict(self._variants)

    def multiplicity(self, trace: Iterable[str]) -> int:
        return self._variants.get(tuple(trace), 0)

    def items(self):
        return self._variants.items()

    def traces(self) -> Iterator[Trace]:
        """Iterate all traces, repeating each variant by its multiplicity."""
        for trace, count in self._variants.items():
            for _ in range(count):
                yield trace

    @property
    def alphabet(self) -> set[str]:
        return {a for trace in self._variants for a in trace}

    def __len__(self) -> int:
        return self._size

    def __bool__(self) -> bool:
        return self._size > 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return self._variants == other._variants

    def __hash__(self):
        return hash(frozenset(self._variants.items()))

    def __add__(self, other: EventLog) -> EventLog:
        merged = Counter(self._variants)
        merged.update(other._variants)
        return EventLog(merged)

    def __repr__(self) -> str:
        shown = ", ".join(f"<{','.join(t)}>^{c}" for t, c in sorted(self._variants.items()))
        return f"EventLog([{shown}])"


def variant_distribution(log: EventLog) -> dict[Trace, Fraction]:
    if not log:
        raise EmptyLogError("empty log")
    total = len(log)
    return {trace: Fraction(count, total) for trace, count in log.items()}


def length_histogram(log: EventLog) -> Counter:
    if not log:
        raise EmptyLogError("empty log")
    hist: Counter = Counter()
    for trace, count in log.items():
        hist[len(trace)] += count
    return hist


# --------------------------------------------------------------------------
# variants format


def format_variants(log: EventLog) -> str:
    out = io.StringIO()
    for trace, count in sorted(log.items(), key=lambda kv: (-kv[1], kv[0])):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(trace)
        out.write(f"{buf.getvalue()};{count}\n")
    return out.getvalue()


def parse_variants(text: str) -> EventLog:
    variants: Counter = Counter()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        labels, sep, count = line.rpartition(";")
        if not sep:
            raise LogFormatError(f"line {lineno}: expected 'labels;count'")
        try:
            n = int(count.strip())
        except ValueError:
            raise LogFormatError(f"line {lineno}: bad count {count.strip()!r}") from None
        if n < 1:
            raise LogFormatError(f"line {lineno}: count must be positive")
        trace = tuple(next(csv.reader([labels]), [])) if labels.strip() else ()
        if any(not a for a in trace):
            raise LogFormatError(f"line {lineno}: empty activity label")
        variants[trace] += n
    if not variants:
        raise EmptyLogError("empty log")
    return EventLog(variants)


def write_log(log: EventLog, path):
    Path(path).write_text(format_variants(log), encoding="utf-8")


# --------------------------------------------------------------------------
# CSV format


def parse_csv(text: str) -> EventLog:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise EmptyLogError("empty log")
    fields = [f.strip() for f in reader.fieldnames]
    reader.fieldnames = fields
    missing = {"case", "activity"} - set(fields)
    if missing:
        raise LogFormatError(f"missing column(s): {', '.join(sorted(missing))}")
    has_position = "position" in fields

    cases: dict[str, list[tuple[int, int, str]]] = {}
    for row_no, row in enumerate(reader):
        case, act = row["case"], row["activity"]
        if case is None or act is None or not act:
            raise LogFormatError(f"row {row_no + 2}: missing case or activity")
        pos = row_no
        if has_position:
            try:
                pos = int(row["position"])
            except (TypeError, ValueError):
                raise LogFormatError(f"row {row_no + 2}: bad position {row['position']!r}") from None
        cases.setdefault(case, []).append((pos, row_no, act))
    if not cases:
        raise EmptyLogError("empty log")

    traces = []
    for case, events in cases.items():
        if has_position:
            positions = [p for p, _, _ in events]
            if positions != list(range(positions[0], positions[0] + len(positions))):
                log.warning("case %s: positions are not contiguous, sorting by position", case)
        events.sort()
        traces.append(tuple(a for _, _, a in events))
    return EventLog.from_traces(traces)


def load_log(path, format: str | None = None) -> EventLog:
    """Load a log from a ``csv`` or ``variants`` file (inferred from the suffix if omitted)."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "variants"
    text = path.read_text(encoding="utf-8-sig")
    if format == "csv":
        return parse_csv(text)
    if format == "variants":
        return parse_variants(text)
    raise ValueError(f"unknown log format {format!r}")
