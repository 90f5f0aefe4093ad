"""Readers and writers for bandwidth, event, detection and result files.

Bandwidth traces are CSV with header ``t_sec,bytes_per_sec``.  Event and
detection traces are UTF-8 JSON lines.  Results are either a summary JSON
object or a per-event CSV table.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

from .gating import Detection, FrameDetections
from .priority import (
    DEFAULT_BETA,
    DEFAULT_GAMMA,
    PriorityOutput,
    clamp_to_band,
    priority_of,
    validate_priority,
)
from .scheduler import Event, Kind
from .simulator import BandwidthTrace, DeliveryLedger, DeliveryRecord, MetricsReport

log = logging.getLogger(__name__)

BANDWIDTH_HEADER = ("t_sec", "bytes_per_sec")
PER_EVENT_FIELDS = ("event_id", "priority", "arrival_s", "alarm_s", "visual_s",
                    "visual_kind", "visual_tx_s", "expired", "starved")


class TraceError(ValueError):
    """A trace file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, path: str | os.PathLike | None = None,
                 line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)


class MalformedRow(TraceError):
    pass


class EmptyTrace(TraceError):
    pass


class MalformedRecord(TraceError):
    pass


class BandViolation(TraceError):
    pass


_UNIT_FACTORS = {"bytes": 1.0, "kbps": 1000.0 / 8.0}


def load_bandwidth_csv(path, period_s: float = 1.0, units: str = "bytes") -> BandwidthTrace:
    """Load a trace, clamping non-positive rates and resampling to ``period_s``.

    Input already on the ``period_s`` grid starting at 0 is kept as is.
    Otherwise samples are mean-pooled into ``[k * period, (k + 1) * period)``
    bins; an empty bin repeats the previous bin's rate.
    """
    if units not in _UNIT_FACTORS:
        raise ValueError(f"unknown bandwidth units {units!r}")
    factor = _UNIT_FACTORS[units]
    times: list[float] = []
    rates: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyTrace("bandwidth trace is empty", path)
        if tuple(h.strip() for h in header) != BANDWIDTH_HEADER:
            raise MalformedRow(f"expected header {','.join(BANDWIDTH_HEADER)}", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedRow(f"expected 2 fields, got {len(row)}", path, lineno)
            try:
                t, rate = float(row[0]), float(row[1]) * factor
            except ValueError as exc:
                raise MalformedRow(str(exc), path, lineno) from None
            if not (math.isfinite(t) and math.isfinite(rate)):
                raise MalformedRow("non-finite value", path, lineno)
            if times and t <= times[-1]:
                raise MalformedRow("timestamps must be strictly increasing", path, lineno)
            if rate <= 0:
                log.warning("%s:%d: non-positive bandwidth %s clamped to 1 B/s",
                            path, lineno, row[1])
                rate = 1.0
            times.append(t)
            rates.append(rate)
    if not times:
        raise EmptyTrace("bandwidth trace has no samples", path)

    on_grid = all(math.isclose(t, k * period_s, abs_tol=1e-9) for k, t in enumerate(times))
    if not on_grid:
        rates = _resample(times, rates, period_s)
    return BandwidthTrace(tuple(max(1, round(r)) for r in rates), period_s)


def _resample(times: Sequence[float], rates: Sequence[float], period: float) -> list[float]:
    t0 = times[0]
    n_bins = int((times[-1] - t0) // period) + 1
    sums = [0.0] * n_bins
    counts = [0] * n_bins
    for t, r in zip(times, rates):
        k = int((t - t0) // period)
        sums[k] += r
        counts[k] += 1
    out: list[float] = []
    for s, c in zip(sums, counts):
        out.append(s / c if c else out[-1])
    return out


def dump_bandwidth_csv(trace: BandwidthTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BANDWIDTH_HEADER)
        for t, b in zip(trace.t_start, trace.bytes_per_s):
            w.writerow((repr(t), b))


def _json_lines(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON: {exc.msg}", path, lineno) from None
            if not isinstance(rec, dict):
                raise MalformedRecord("record is not an object", path, lineno)
            yield lineno, rec


_EVENT_FIELDS = ("event_id", "arrival_s", "level", "score", "c_json", "c_roi", "c_box")


def _number(rec: dict, key: str, path, lineno, integral: bool = False):
    v = rec.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedRecord(f"field {key!r} must be a number", path, lineno)
    if integral and not (isinstance(v, int) or float(v).is_integer()):
        raise MalformedRecord(f"field {key!r} must be an integer", path, lineno)
    if not math.isfinite(v):
        raise MalformedRecord(f"field {key!r} is not finite", path, lineno)
    return int(v) if integral else float(v)


def load_events(path, beta: float = DEFAULT_BETA, gamma: float = DEFAULT_GAMMA,
                strict: bool = False) -> list[Event]:
    """Parse an event trace, checking score bands and sorting by arrival.

    Out-of-band scores are clamped into the band with a warning, or raise
    ``BandViolation`` when ``strict``.
    """
    events = []
    for lineno, rec in _json_lines(path):
        missing = [k for k in _EVENT_FIELDS if k not in rec]
        if missing:
            raise MalformedRecord(f"missing fields {missing}", path, lineno)
        eid = rec["event_id"]
        if not isinstance(eid, str) or not eid:
            raise MalformedRecord("event_id must be a non-empty string", path, lineno)
        arrival = _number(rec, "arrival_s", path, lineno)
        level = _number(rec, "level", path, lineno, integral=True)
        score = _number(rec, "score", path, lineno)
        num_levels = _number(rec, "num_levels", path, lineno, integral=True) \
            if "num_levels" in rec else 2
        costs = [_number(rec, k, path, lineno, integral=True) for k in ("c_json", "c_roi", "c_box")]
        if arrival < 0:
            raise MalformedRecord("arrival_s must be non-negative", path, lineno)
        if any(c <= 0 for c in costs):
            raise MalformedRecord("unit costs must be positive", path, lineno)
        try:
            out = PriorityOutput(level, score, num_levels)
        except ValueError as exc:
            raise MalformedRecord(str(exc), path, lineno) from None
        if not validate_priority(out, gamma):
            if strict:
                raise BandViolation(
                    f"score {score} outside the band of level {level}", path, lineno)
            log.warning("%s:%d: score %s outside the band of level %d; clamped",
                        path, lineno, score, level)
            out = clamp_to_band(out, gamma)
        events.append(Event(eid, arrival, priority_of(out, beta), *costs,
                            level=out.level, score=out.score))
    if len({e.id for e in events}) != len(events):
        raise MalformedRecord("duplicate event_id in trace", path)
    events.sort(key=lambda e: (e.arrival_s, e.id))
    return events


def dump_events(events: Iterable[Event], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            rec = {"event_id": e.id, "arrival_s": e.arrival_s, "level": e.level,
                   "score": e.score, "c_json": e.c_json, "c_roi": e.c_roi,
                   "c_box": e.c_box}
            fh.write(json.dumps(rec) + "\n")


def load_detections(path) -> list[FrameDetections]:
    frames = []
    last_t = -math.inf
    for lineno, rec in _json_lines(path):
        try:
            frame_id = rec["frame_id"]
            t = float(rec["timestamp_s"])
            dets = tuple(
                Detection(bbox=tuple(float(x) for x in d["bbox"]),
                          class_label=str(d["class"]),
                          confidence=float(d["conf"]),
                          size_bytes=int(d.get("size_bytes", 0)))
                for d in rec["detections"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad detection record: {exc}", path, lineno) from None
        if any(len(d.bbox) != 4 for d in dets):
            raise MalformedRecord("bbox must have 4 coordinates", path, lineno)
        if t < last_t:
            raise MalformedRecord("timestamps must be non-decreasing", path, lineno)
        last_t = t
        frames.append(FrameDetections(str(frame_id), t, dets))
    return frames


def dump_detections(frames: Iterable[FrameDetections], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in frames:
            rec = {"frame_id": f.frame_id, "timestamp_s": f.timestamp_s,
                   "detections": [{"bbox": list(d.bbox), "class": d.class_label,
                                   "conf": d.confidence, "size_bytes": d.size_bytes}
                                  for d in f.detections]}
            fh.write(json.dumps(rec) + "\n")


def report_to_dict(report: MetricsReport) -> dict:
    out = {
        "w_alarm_s": report.w_alarm_s,
        "w_alarm_sum": report.w_alarm_sum,
        "vtr": {f"{d:g}": v for d, v in report.vtr.items()},
        "counts": {"events": report.n_events, "alarms": report.n_alarms,
                   "visuals": report.n_visuals, "expired": report.n_expired,
                   "starved": report.n_starved},
    }
    if report.avg_visual_delay_s is not None:
        out["avg_visual_delay_s"] = report.avg_visual_delay_s
    return out


def report_from_dict(d: dict) -> MetricsReport:
    c = d["counts"]
    return MetricsReport(
        w_alarm_s=d["w_alarm_s"],
        vtr={float(k): v for k, v in d["vtr"].items()},
        avg_visual_delay_s=d.get("avg_visual_delay_s"),
        n_events=c["events"], n_alarms=c["alarms"], n_visuals=c["visuals"],
        n_expired=c["expired"], n_starved=c["starved"],
        w_alarm_sum=d["w_alarm_sum"],
    )


def emit_results(ledger: DeliveryLedger, report: MetricsReport, path,
                 format: str = "summary", config: dict | None = None) -> None:
    """Write a summary JSON object or a per-event CSV table."""
    try:
        if format == "summary":
            doc = report_to_dict(report)
            if config is not None:
                doc["config"] = config
            Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
        elif format == "per_event":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(PER_EVENT_FIELDS)
                for r in ledger.values():
                    w.writerow((r.event_id, repr(r.priority), repr(r.arrival_s),
                                _opt(r.alarm_s), _opt(r.visual_s),
                                r.visual_kind.value if r.visual_kind else "",
                                _opt(r.visual_tx_s), int(r.expired), int(r.starved)))
        else:
            raise ValueError(f"unknown results format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc


def _opt(x: float | None) -> str:
    return "" if x is None else repr(x)


def load_summary(path) -> tuple[MetricsReport, dict | None]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return report_from_dict(doc), doc.get("config")


def load_per_event(path) -> DeliveryLedger:
    ledger = DeliveryLedger()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            opt = lambda k: float(row[k]) if row[k] else None  # noqa: E731
            ledger[row["event_id"]] = DeliveryRecord(
                event_id=row["event_id"], priority=float(row["priority"]),
                arrival_s=float(row["arrival_s"]), alarm_s=opt("alarm_s"),
                visual_s=opt("visual_s"),
                visual_kind=Kind(row["visual_kind"]) if row["visual_kind"] else None,
                visual_tx_s=opt("visual_tx_s"),
                expired=row["expired"] == "1", starved=row["starved"] == "1")
    return ledger
