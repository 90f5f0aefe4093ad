"""Command-line entry point: ``dualtx <command> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import gating, oracle, simulator, traceio
from .baselines import Policy
from .scheduler import IntervalContext, json_load, schedule_interval

log = logging.getLogger("dualtx")

HEADLINE_METRICS = (("w_alarm_s", "min"), ("vtr@0.5", "max"), ("vtr@1", "max"),
                    ("avg_visual_delay_s", "min"))


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4f}"


def cmd_gate(args) -> int:
    frames = traceio.load_detections(args.detections)
    order = _names(args.severity_order)
    counts = {r: 0 for r in gating.Route}
    lines = []
    for f in frames:
        d = gating.gate(f, args.tau_g, args.tau_high)
        counts[d.route] += 1
        rec = {"frame_id": f.frame_id, "timestamp_s": f.timestamp_s,
               "trigger_score": d.trigger_score, "gate": d.gate,
               "route": d.route.value, "n_valid": len(d.valid_set)}
        if d.valid_set:
            roi = gating.select_representative_roi(d.valid_set, order)
            rec["roi"] = {"bbox": list(roi.bbox), "class": roi.class_label,
                          "conf": roi.confidence, "size_bytes": roi.size_bytes}
            if d.route is gating.Route.DIRECT_ACCEPT:
                rec["level"] = gating.level_from_class(roi.class_label, order)
        lines.append(json.dumps(rec, sort_keys=True))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    n = len(frames)
    load = counts[gating.Route.TO_MLLM] / n if n else 0.0
    print(f"frames={n} discard={counts[gating.Route.DISCARD]} "
          f"to_mllm={counts[gating.Route.TO_MLLM]} "
          f"direct_accept={counts[gating.Route.DIRECT_ACCEPT]} mllm_load={load:.4f}",
          file=sys.stderr)
    return 0


def _event_params(args) -> simulator.EventParams:
    return simulator.EventParams(beta=args.beta, gamma=args.gamma)


def cmd_gen_events(args) -> int:
    events = simulator.gen_events(args.pattern, args.duration, args.seed, _event_params(args))
    traceio.dump_events(events, args.out)
    print(f"wrote {len(events)} events to {args.out}")
    return 0


def cmd_gen_trace(args) -> int:
    trace = simulator.gen_bandwidth_trace(args.duration, args.mean, args.noise, args.seed)
    traceio.dump_bandwidth_csv(trace, args.out)
    print(f"wrote {len(trace)} samples to {args.out}")
    return 0


def _config(args, **over) -> simulator.SimulationConfig:
    base = dict(interval_delta=args.interval, d_vis=args.dvis, beta=args.beta,
                gamma=args.gamma, bandwidth_scale=args.scale, t_parse=args.t_parse,
                json_only_order=args.json_only_order,
                visual_delay_origin=args.visual_delay_origin,
                normalize_w_alarm=not args.unnormalized_w_alarm,
                wrap_trace=not args.strict_trace, seed=getattr(args, "seed", 0))
    base.update(over)
    return simulator.SimulationConfig(**base)


def cmd_simulate(args) -> int:
    trace = traceio.load_bandwidth_csv(args.bw_trace, args.interval, args.bandwidth_units)
    events = traceio.load_events(args.events, args.beta, args.gamma, strict=args.strict_bands)
    config = _config(args, policy=args.policy)
    ledger, report = simulator.run(trace, events, config)
    if args.out:
        traceio.emit_results(ledger, report, args.out, args.format, config.to_dict())
    for name, value in report.headline().items():
        print(f"{name}: {_fmt(value)}")
    return 0


@dataclass(frozen=True)
class Scenario:
    policy: str
    pattern: str
    scale: float
    seed: int
    dvis: float


def run_scenario(sc: Scenario, base: dict, trace: simulator.BandwidthTrace | None,
                 duration: float, bw_mean: float, bw_noise: float) -> dict:
    """One row of a comparison matrix; pure in its arguments."""
    events = simulator.gen_events(sc.pattern, duration, sc.seed,
                                  simulator.EventParams(beta=base["beta"], gamma=base["gamma"]))
    if trace is None:
        trace = simulator.gen_bandwidth_trace(duration, bw_mean, bw_noise, sc.seed)
    config = simulator.SimulationConfig(**{**base, "policy": sc.policy,
                                           "bandwidth_scale": sc.scale,
                                           "d_vis": sc.dvis, "seed": sc.seed})
    _, report = simulator.run(trace, events, config)
    d = traceio.report_to_dict(report)
    row = {"policy": sc.policy, "pattern": sc.pattern, "scale": sc.scale,
           "seed": sc.seed, "dvis": sc.dvis, "w_alarm_s": d["w_alarm_s"],
           "avg_visual_delay_s": d.get("avg_visual_delay_s")}
    for k, v in d["vtr"].items():
        row[f"vtr@{k}"] = v
    row["counts"] = d["counts"]
    return row


def rank_rows(rows: list[dict]) -> list[dict]:
    """Winning policies per (pattern, scale, seed, dvis) group and metric."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["pattern"], r["scale"], r["seed"], r["dvis"]), []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        entry = dict(zip(("pattern", "scale", "seed", "dvis"), key))
        for metric, sense in HEADLINE_METRICS:
            vals = [(r[metric], r["policy"]) for r in g if r.get(metric) is not None]
            if not vals:
                entry[metric] = []
                continue
            best = (min if sense == "min" else max)(v for v, _ in vals)
            entry[metric] = sorted(p for v, p in vals if v == best)
        out.append(entry)
    return out


def cmd_compare(args) -> int:
    policies = [Policy(p).value for p in _names(args.policies)]
    patterns = _names(args.patterns)
    for p in patterns:
        if p not in simulator.PATTERNS:
            raise ValueError(f"unknown pattern {p!r}")
    dvis_values = _floats(args.dvis_sweep) if args.dvis_sweep else [args.dvis]
    scenarios = [Scenario(pol, pat, sc, seed, dv)
                 for pol in policies for pat in patterns for sc in _floats(args.scales)
                 for seed in _ints(args.seeds) for dv in dvis_values]
    trace = (traceio.load_bandwidth_csv(args.bw_trace, args.interval, args.bandwidth_units)
             if args.bw_trace else None)
    base = _config(args).to_dict()
    base.pop("policy")
    extra = (base, trace, args.duration, args.bw_mean, args.bw_noise)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_scenario, scenarios, *[[x] * len(scenarios) for x in extra]))
    else:
        rows = [run_scenario(s, *extra) for s in scenarios]
    rows.sort(key=lambda r: (r["pattern"], r["scale"], r["seed"], r["dvis"], r["policy"]))
    doc = {"config": base, "duration_s": args.duration, "rows": rows,
           "rankings": rank_rows(rows)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    for r in rows:
        print(f"{r['policy']:>15} {r['pattern']:>6} x{r['scale']:<5g} seed={r['seed']} "
              f"dvis={r['dvis']:g}  W-Alarm={_fmt(r['w_alarm_s'])} "
              f"VTR@0.5={_fmt(r.get('vtr@0.5'))} VTR@1={_fmt(r.get('vtr@1'))} "
              f"AvgVisDelay={_fmt(r['avg_visual_delay_s'])}")
    return 0


def cmd_oracle_check(args) -> int:
    if args.n > oracle.N_MAX:
        raise oracle.InstanceTooLarge(
            f"--n {args.n} exceeds the exact-solver limit of {oracle.N_MAX}")
    rng = random.Random(args.seed)
    gaps = []
    failures = 0
    out = open(args.out, "w", encoding="utf-8") if args.out else None
    try:
        for trial in range(args.trials):
            n = rng.randint(1, args.n)
            inst = oracle.random_instance(rng, n, visuals=not args.no_visuals,
                                          ample_budget=args.ample_budget)
            ctx = IntervalContext(inst.bandwidth, inst.delta, inst.d_vis, pending=inst.events)
            greedy = schedule_interval(ctx, visuals=inst.visuals)
            best = oracle.exact_lexicographic(inst.events, inst.bandwidth, inst.delta,
                                              inst.d_vis, visuals=inst.visuals)
            rep = oracle.compare(greedy, best, inst.events)
            ok = rep.primary_gap >= 0 and (rep.primary_gap > 0 or rep.secondary_gap >= 0)
            failures += not ok
            gaps.append(rep.primary_gap)
            if out:
                out.write(json.dumps({
                    "trial": trial, "n": n, "bandwidth": inst.bandwidth,
                    "d_vis": inst.d_vis, "json_load": json_load(inst.events),
                    "primary_gap": float(rep.primary_gap),
                    "secondary_gap": float(rep.secondary_gap),
                    "exact_match": rep.exact_match, "feasible": rep.feasible,
                    "dominance_ok": ok}, sort_keys=True) + "\n")
    finally:
        if out:
            out.close()
    matches = sum(g == 0 for g in gaps)
    fg = [float(g) for g in gaps]
    print(f"trials={len(gaps)} exact_matches={matches} "
          f"({matches / max(1, len(gaps)):.2%}) mean_gap={statistics.fmean(fg) if fg else 0:.6g} "
          f"max_gap={max(fg, default=0):.6g} dominance_failures={failures}")
    return 1 if failures else 0


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dvis", type=float, default=1.5, help="visual validity deadline (s)")
    p.add_argument("--interval", type=float, default=1.0, help="scheduling interval (s)")
    p.add_argument("--scale", type=float, default=1.0, help="bandwidth scale factor")
    p.add_argument("--beta", type=float, default=0.5, help="level weight in the priority mix")
    p.add_argument("--gamma", type=float, default=0.5, help="two-level score band threshold")
    p.add_argument("--t-parse", type=float, default=0.0, help="cloud-side parse time (s)")
    p.add_argument("--bandwidth-units", choices=("bytes", "kbps"), default="bytes",
                   help="unit of the bandwidth column in --bw-trace")
    p.add_argument("--json-only-order", choices=("phi", "priority"), default="phi",
                   help="ranking used by the json-only policy")
    p.add_argument("--visual-delay-origin", choices=("arrival", "interval"),
                   default="arrival", help="reference point of visual delays")
    p.add_argument("--unnormalized-w-alarm", action="store_true",
                   help="report the priority-weighted sum instead of the weighted mean")
    p.add_argument("--strict-trace", action="store_true",
                   help="fail instead of wrapping when the bandwidth trace runs out")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="dualtx", formatter_class=fmt,
                                     description="Priority- and bandwidth-aware uplink scheduling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gate", formatter_class=fmt, help="gate and route detection frames")
    p.add_argument("--detections", required=True, help="detection trace (JSON lines)")
    p.add_argument("--tau-g", type=float, default=gating.DEFAULT_TAU_LOW, help="gating threshold")
    p.add_argument("--tau-high", type=float, default=gating.DEFAULT_TAU_HIGH,
                   help="direct-accept threshold")
    p.add_argument("--severity-order", default=",".join(gating.DEFAULT_SEVERITY_ORDER),
                   help="class labels from least to most severe")
    p.add_argument("--out", help="decision output (JSON lines); stdout if omitted")
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("gen-events", formatter_class=fmt, help="generate a synthetic event trace")
    p.add_argument("--pattern", choices=simulator.PATTERNS, required=True)
    p.add_argument("--duration", type=float, default=600.0, help="trace length (s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_events)

    p = sub.add_parser("gen-trace", formatter_class=fmt,
                       help="generate a flat-plus-noise bandwidth trace")
    p.add_argument("--duration", type=float, default=600.0, help="trace length (s)")
    p.add_argument("--mean", type=float, default=1_500_000, help="mean rate (B/s)")
    p.add_argument("--noise", type=float, default=0.2, help="relative uniform noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("simulate", formatter_class=fmt, help="replay one policy")
    p.add_argument("--bw-trace", required=True, help="bandwidth CSV (t_sec,bytes_per_sec)")
    p.add_argument("--events", required=True, help="event trace (JSON lines)")
    p.add_argument("--policy", required=True, choices=[x.value for x in Policy])
    _add_sim_flags(p)
    p.add_argument("--strict-bands", action="store_true",
                   help="reject out-of-band priority scores instead of clamping")
    p.add_argument("--format", choices=("summary", "per_event"), default="summary")
    p.add_argument("--out", help="results file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", formatter_class=fmt, help="run a policy comparison matrix")
    p.add_argument("--policies", default="dat,priority-only,bandwidth-only",
                   help="comma-separated policies")
    p.add_argument("--patterns", default="burst", help="comma-separated arrival patterns")
    p.add_argument("--scales", default="0.25", help="comma-separated bandwidth scales")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--dvis-sweep", default="", help="comma-separated D_vis values (overrides --dvis)")
    p.add_argument("--duration", type=float, default=600.0, help="workload length (s)")
    p.add_argument("--bw-trace", help="bandwidth CSV; synthetic flat-plus-noise if omitted")
    p.add_argument("--bw-mean", type=float, default=1_500_000, help="synthetic mean rate (B/s)")
    p.add_argument("--bw-noise", type=float, default=0.2, help="synthetic relative noise")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_sim_flags(p)
    p.add_argument("--out", help="results matrix (JSON)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle-check", formatter_class=fmt,
                       help="greedy vs exact optimum on random small instances")
    p.add_argument("--n", type=int, default=4, help=f"max events per instance (<= {oracle.N_MAX})")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-visuals", action="store_true", help="disable visual units")
    p.add_argument("--ample-budget", action="store_true",
                   help="force the budget to cover every JSON unit")
    p.add_argument("--out", help="gap records (JSON lines)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"dualtx {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
