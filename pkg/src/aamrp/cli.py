"""Command line front end: ``aamrp {run,validate,trace,oracle}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import sys
from pathlib import Path

from . import checks
from .ant_tree import write_convergence_csv
from .engine import ConfigError, run
from .metrics import NA, MetricsRow, aggregate, counters_from_trace, format_csv, format_value
from .scenario import ScenarioFile, ScenarioParseError, load_scenario, resolved_lines, sweep_points

log = logging.getLogger("aamrp")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
METRICS = ("overhead", "load", "delay_s", "pdf_pct")


def seed_offset() -> int:
    raw = os.environ.get("AAMRP_SEED_OFFSET", "0").strip() or "0"
    try:
        return int(raw)
    except ValueError:
        raise ConfigError([("AAMRP_SEED_OFFSET", f"must be an integer, got {raw!r}")]) from None


def run_name(protocol: str, n: int, g: int, seed: int) -> str:
    return f"{protocol}_n{n}_g{g}_s{seed}"


def sweep_tasks(sf: ScenarioFile, offset: int = 0) -> list[tuple[str, int, int, int]]:
    pts = sweep_points(sf.sweep)
    return sorted((p, n, g, s + offset) for p in sf.sweep.protocols for n, g in pts for s in sf.sweep.seeds)


def _row_to_json(r: MetricsRow) -> dict:
    return {"protocol": r.protocol, "n_nodes": r.n_nodes, "group_size": r.group_size, "seed": r.seed,
            **r.values()}


def _row_from_json(d: dict) -> MetricsRow:
    return MetricsRow(d["protocol"], d["n_nodes"], d["group_size"], d["seed"],
                      d["overhead"], d["load"], d["delay_s"], d["pdf_pct"])


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _execute(job) -> dict:
    """Run one sweep point; top level so worker processes can pickle it."""
    sf, protocol, n, g, seed, out_dir, want_trace = job
    res = run(sf.scenario(protocol, n, g), seed, trace=want_trace, convergence=sf.output.convergence)
    name = run_name(protocol, n, g, seed)
    out = Path(out_dir)
    if want_trace:
        _write_atomic(out / "traces" / f"{name}.trace", "\n".join(res.trace) + "\n")
    if sf.output.convergence and res.sim.convergence:
        for i, series in enumerate(res.sim.convergence, 1):
            write_convergence_csv(out / "convergence" / f"{name}_r{i}.csv", series)
    return _row_to_json(res.row)


def run_sweep(sf: ScenarioFile, out_dir, jobs: int = 1, trace: bool | None = None) -> list[MetricsRow]:
    """Run every sweep point not already marked done, then write the CSV and plot files."""
    out = Path(out_dir)
    want_trace = sf.output.trace if trace is None else trace
    for sub in ("runs", "traces" if want_trace else None, "convergence" if sf.output.convergence else None):
        if sub:
            (out / sub).mkdir(parents=True, exist_ok=True)
    fp = sf.fingerprint()
    tasks = sweep_tasks(sf, seed_offset())
    rows: dict[str, dict] = {}
    todo = []
    for p, n, g, s in tasks:
        name = run_name(p, n, g, s)
        marker = out / "runs" / f"{name}.json"
        if marker.exists():
            try:
                saved = json.loads(marker.read_text())
            except ValueError:
                saved = {}
            if saved.get("fingerprint") == fp and (not want_trace or (out / "traces" / f"{name}.trace").exists()):
                rows[name] = saved["row"]
                continue
        todo.append((sf, p, n, g, s, str(out), want_trace))
    log.info("%d runs in sweep, %d already done", len(tasks), len(tasks) - len(todo))

    def finish(row: dict) -> None:
        name = run_name(row["protocol"], row["n_nodes"], row["group_size"], row["seed"])
        _write_atomic(out / "runs" / f"{name}.json", json.dumps({"fingerprint": fp, "row": row}))
        rows[name] = row
        log.info("done %s (%d/%d)", name, len(rows), len(tasks))

    if jobs > 1 and len(todo) > 1:
        with multiprocessing.get_context("spawn").Pool(min(jobs, len(todo))) as pool:
            for row in pool.imap_unordered(_execute, todo):
                finish(row)
    else:
        for job in todo:
            finish(_execute(job))

    result = [_row_from_json(rows[run_name(*t)]) for t in tasks]
    _write_atomic(out / sf.output.csv, format_csv(result))
    if sf.output.plots:
        write_plot_data(result, sf, out / "plots")
    return result


def write_plot_data(rows, sf: ScenarioFile, plot_dir) -> list[Path]:
    """One whitespace-separated file per (sweep axis, metric), mean value per protocol."""
    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    means = {(m.protocol, m.n_nodes, m.group_size): m for m in (r.mean() for r in aggregate(rows))}
    protocols = sorted(sf.sweep.protocols)
    axes = [("nodes", "n_nodes", [(n, sf.sweep.node_sweep_group_size) for n in sorted(set(sf.sweep.node_counts))]),
            ("groups", "group_size", [(sf.sweep.group_sweep_nodes, g) for g in sorted(set(sf.sweep.group_sizes))])]
    written = []
    for axis, xname, points in axes:
        for metric in METRICS:
            lines = ["# " + " ".join([xname] + protocols)]
            for n, g in points:
                x = n if axis == "nodes" else g
                vals = []
                for p in protocols:
                    m = means.get((p, n, g))
                    vals.append(format_value(getattr(m, metric)) if m is not None else NA)
                lines.append(" ".join([str(x)] + vals))
            path = plot_dir / f"{axis}_{metric}.dat"
            _write_atomic(path, "\n".join(lines) + "\n")
            written.append(path)
    return written


def _load(path) -> ScenarioFile:
    if path is None:
        return ScenarioFile()
    return load_scenario(path)


def _report_violations(bad, stream) -> None:
    for key, msg in bad:
        print(f"error: {key}: {msg}", file=stream)


def cmd_validate(args) -> int:
    sf = _load(args.scenario)
    for line in resolved_lines(sf):
        print(line)
    bad = sf.violations()
    _report_violations(bad, sys.stdout)
    return EXIT_CONFIG if bad else EXIT_OK


def cmd_run(args) -> int:
    sf = _load(args.scenario)
    bad = sf.violations()
    if bad:
        _report_violations(bad, sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        _report_violations([("--jobs", "must be >= 1")], sys.stderr)
        return EXIT_CONFIG
    rows = run_sweep(sf, args.out, jobs=args.jobs, trace=True if args.trace else None)
    if not args.quiet:
        print(f"{len(rows)} runs written to {Path(args.out) / sf.output.csv}")
    return EXIT_OK


def cmd_trace(args) -> int:
    with open(args.trace_file) as fh:
        c = counters_from_trace(fh)
    row = MetricsRow.from_counters("trace", 0, 0, 0, c)
    for name, v in row.values().items():
        print(f"{name} = {format_value(v)}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    failed = False
    which = args.which
    if which in ("ksp", "all"):
        r = checks.check_k_shortest(n_graphs=args.count or 200, seed=args.seed)
        print(f"ksp: {r.compared} comparisons, {len(r.mismatches)} mismatches")
        for m in r.mismatches[:5]:
            print(f"  graph {m[0]} K={m[1]}: got {m[2]} want {m[3]}")
        failed |= not r.ok
    if which in ("ants", "all"):
        r = checks.check_ant_convergence(n_instances=args.count or 100, seed=args.seed)
        n = len(r.instances)
        print(f"ants: {r.hits}/{n} within 5% of optimum, {r.decisions} decisions, "
              f"max |sum p - 1| = {r.worst_sum_error:.3g}, {r.support_violations} support violations")
        failed |= r.hits < 0.95 * n or r.worst_sum_error > 1e-9 or r.support_violations > 0
    if which in ("range", "all"):
        bad = checks.check_broadcast_range()
        print(f"range: {len(bad)} mismatches over 11^3 cases")
        failed |= bool(bad)
    if which in ("quiescence", "all"):
        r = checks.check_quiescence(n_topologies=args.count or 50, seed=args.seed)
        print(f"quiescence: {r.topologies} static topologies, {len(r.problems)} problems, "
              f"min PDF {min(r.pdfs):g}%, last role change {r.last_role_change:.2f} s")
        for p in r.problems[:5]:
            print(f"  {p}")
        failed |= not r.ok
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aamrp", description="Cluster-based ant multicast simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out")
    p.add_argument("--trace", action="store_true", help="write one trace file per run")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("validate", help="print the resolved scenario and any violations")
    p.add_argument("--scenario")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("trace", help="recompute metrics from a trace file")
    p.add_argument("trace_file")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("oracle", help="compare production code with brute-force references")
    p.add_argument("which", nargs="?", default="all", choices=("ksp", "ants", "range", "quiescence", "all"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ScenarioParseError as e:
        print(f"error: {args.scenario}:{e.line}: {e.key}: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        _report_violations(e.violations, sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
