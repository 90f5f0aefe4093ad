import json
import logging

import pytest

from dualtx.gating import Detection, FrameDetections
from dualtx.priority import priority_of, PriorityOutput
from dualtx.simulator import BandwidthTrace, SimulationConfig, gen_bandwidth_trace, gen_events, run
from dualtx.traceio import (
    PER_EVENT_FIELDS,
    BandViolation,
    EmptyTrace,
    MalformedRecord,
    MalformedRow,
    TraceError,
    dump_bandwidth_csv,
    dump_detections,
    dump_events,
    emit_results,
    load_bandwidth_csv,
    load_detections,
    load_events,
    load_per_event,
    load_summary,
)

HEADER = "t_sec,bytes_per_sec\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_bandwidth_two_samples(tmp_path):
    t = load_bandwidth_csv(write(tmp_path, "bw.csv", HEADER + "0,100000\n1,50000\n"))
    assert t.bytes_per_s == (100_000, 50_000)
    assert t.t_start == (0.0, 1.0)


def test_bandwidth_zero_is_clamped(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        t = load_bandwidth_csv(write(tmp_path, "bw.csv", HEADER + "0,0\n"))
    assert t.bytes_per_s == (1,)
    assert "clamped" in caplog.text


@pytest.mark.parametrize("text", ["", HEADER, HEADER + "\n\n"])
def test_bandwidth_empty(tmp_path, text):
    with pytest.raises(EmptyTrace):
        load_bandwidth_csv(write(tmp_path, "bw.csv", text))


@pytest.mark.parametrize("text,line", [
    ("time,rate\n0,1\n", 1),
    (HEADER + "0,100\n1,abc\n", 3),
    (HEADER + "0,100\n1\n", 3),
    (HEADER + "0,100\n0,100\n", 3),
    (HEADER + "0,inf\n", 2),
])
def test_bandwidth_malformed_rows_report_line(tmp_path, text, line):
    with pytest.raises(MalformedRow) as info:
        load_bandwidth_csv(write(tmp_path, "bw.csv", text))
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_bandwidth_kbps(tmp_path):
    t = load_bandwidth_csv(write(tmp_path, "bw.csv", HEADER + "0,800\n1,8\n"), units="kbps")
    assert t.bytes_per_s == (100_000, 1_000)
    with pytest.raises(ValueError):
        load_bandwidth_csv(write(tmp_path, "bw.csv", HEADER + "0,8\n"), units="bits")


def test_bandwidth_resampled_by_mean_pooling(tmp_path):
    text = HEADER + "0,100\n0.5,300\n1.2,50\n3.1,70\n"
    t = load_bandwidth_csv(write(tmp_path, "bw.csv", text))
    # bins [0,1) [1,2) [2,3) [3,4); the empty bin repeats its predecessor
    assert t.bytes_per_s == (200, 50, 50, 70)


def test_bandwidth_round_trip(tmp_path):
    t = gen_bandwidth_trace(20, seed=4)
    dump_bandwidth_csv(t, tmp_path / "bw.csv")
    assert load_bandwidth_csv(tmp_path / "bw.csv") == t


def event_line(**over):
    rec = {"event_id": "a", "arrival_s": 0.0, "level": 1, "score": 0.9,
           "c_json": 2048, "c_roi": 61440, "c_box": 153600}
    rec.update(over)
    return json.dumps(rec) + "\n"


def test_load_event(tmp_path):
    [e] = load_events(write(tmp_path, "ev.jsonl", event_line()), beta=0.5)
    assert (e.c_json, e.c_roi, e.c_box) == (2048, 61440, 153600)
    assert e.priority == pytest.approx(priority_of(PriorityOutput(1, 0.9), 0.5))
    assert e.priority == pytest.approx(0.95)


def test_score_out_of_range(tmp_path):
    with pytest.raises(MalformedRecord) as info:
        load_events(write(tmp_path, "ev.jsonl", event_line() + event_line(event_id="b", score=1.2)))
    assert info.value.line == 2


def test_events_sorted(tmp_path):
    text = event_line(event_id="late", arrival_s=5.0) + event_line(event_id="early", arrival_s=1.0)
    assert [e.id for e in load_events(write(tmp_path, "ev.jsonl", text))] == ["early", "late"]


def test_band_violation(tmp_path, caplog):
    p = write(tmp_path, "ev.jsonl", event_line(level=1, score=0.2))
    with pytest.raises(BandViolation):
        load_events(p, strict=True)
    with caplog.at_level(logging.WARNING):
        [e] = load_events(p)
    assert e.score == 0.5 and "clamped" in caplog.text


@pytest.mark.parametrize("text", [
    "not json\n",
    "[1, 2]\n",
    json.dumps({"event_id": "a"}) + "\n",
    event_line(c_json=0),
    event_line(c_roi=1.5),
    event_line(arrival_s=-1),
    event_line(score="high"),
    event_line() + event_line(),
])
def test_malformed_events(tmp_path, text):
    with pytest.raises(MalformedRecord):
        load_events(write(tmp_path, "ev.jsonl", text))


def test_trace_errors_are_value_errors():
    assert issubclass(TraceError, ValueError)


def test_events_round_trip(tmp_path):
    evs = gen_events("burst", 60, 2)
    dump_events(evs, tmp_path / "ev.jsonl")
    assert load_events(tmp_path / "ev.jsonl") == evs


def test_detections_round_trip(tmp_path):
    frames = [FrameDetections("f0", 0.0, ()),
              FrameDetections("f1", 0.04, (Detection((0.1, 0.2, 0.3, 0.4), "severe", 0.9, 5000),
                                           Detection((0.5, 0.5, 0.9, 0.9), "moderate", 0.3, 800)))]
    dump_detections(frames, tmp_path / "det.jsonl")
    assert load_detections(tmp_path / "det.jsonl") == frames


def test_detections_malformed(tmp_path):
    bad = json.dumps({"frame_id": "f", "timestamp_s": 0, "detections": [{"bbox": [1, 2]}]})
    with pytest.raises(MalformedRecord):
        load_detections(write(tmp_path, "det.jsonl", bad + "\n"))


def _run(policy):
    evs = gen_events("medium", 40, 5)
    cfg = SimulationConfig(policy=policy)
    return (*run(gen_bandwidth_trace(40, seed=5), evs, cfg), cfg, evs)


def test_summary_round_trip(tmp_path):
    ledger, report, cfg, _ = _run("dat")
    emit_results(ledger, report, tmp_path / "s.json", config=cfg.to_dict())
    loaded, echo = load_summary(tmp_path / "s.json")
    assert loaded == report
    assert echo == json.loads(json.dumps(cfg.to_dict()))


def test_json_only_summary(tmp_path):
    ledger, report, _, _ = _run("json-only")
    emit_results(ledger, report, tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert "avg_visual_delay_s" not in doc
    assert all(v == 0 for v in doc["vtr"].values())
    assert load_summary(tmp_path / "s.json")[0] == report


def test_per_event_round_trip(tmp_path):
    ledger, report, _, evs = _run("dat")
    emit_results(ledger, report, tmp_path / "e.csv", format="per_event")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0].split(",") == list(PER_EVENT_FIELDS)
    assert len(lines) - 1 == len(evs)
    assert load_per_event(tmp_path / "e.csv") == ledger


def test_emit_errors(tmp_path):
    ledger, report, _, _ = _run("dat")
    with pytest.raises(ValueError):
        emit_results(ledger, report, tmp_path / "x", format="xml")
    with pytest.raises(OSError) as info:
        emit_results(ledger, report, tmp_path / "missing" / "s.json")
    assert "missing" in str(info.value)
