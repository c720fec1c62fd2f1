"""``mlsched`` command line: run a scenario, compare policies, replicate experiments.

Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 replication check failed.
Override precedence, lowest first: scenario file, ``--policy``, ``--strategy``, ``--seed``.
"""
from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from .harness.export import summarize_file, write_result
from .harness.runner import run_scenario, threshold
from .harness.scenario import STRATEGIES, ScenarioConfig, ScenarioError, load_scenario, with_overrides
from .replicate import EXPERIMENTS, replicate

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _variant(cfg: ScenarioConfig) -> str:
    if cfg.kind == "batch" and cfg.policy.id == "dynaspark":
        return cfg.policy.params["strategy"]
    if cfg.kind == "federation":
        return cfg.policy.params["trajectory"]
    return cfg.policy.id


def summary_line(cfg: ScenarioConfig, s: dict) -> str:
    head = f"{cfg.name} [{_variant(cfg)}] seed={cfg.seed}:"
    if cfg.kind == "batch":
        tail = f"{s['jobs']} jobs, {s['violations']} violations, mean cores {s['mean_cores']:.2f}"
        if s["makespan"] is not None:
            tail += f", makespan {s['makespan']:.1f}"
        return f"{head} {tail}"
    if cfg.kind == "federation":
        verdict = "reached" if s.get("reached") else "not reached"
        return (f"{head} final ac_eval {s['final_ac_eval']:.4f} ({verdict} {s['ac_sla']:g}), "
                f"{s['total_epochs']} epochs over {s['rounds']} rounds")
    return (f"{head} {s['violations']}/{s['windows']} violation windows, "
            f"mean cores {s['mean_cores']:.2f}")


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario)
    return with_overrides(cfg, seed=args.seed, policy=getattr(args, "policy", None),
                          strategy=getattr(args, "strategy", None))


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else Path(args.scenario).resolve().parent


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_scenario(cfg)
    paths = write_result(result, _out_dir(args), cfg.name, args.format)
    print(summary_line(cfg, summarize_file(paths["rows"], threshold(cfg))))
    return EXIT_OK


def _compare_rows(cfgs, summaries) -> list[list[str]]:
    kind = cfgs[0].kind
    if kind == "batch":
        jobs = list(summaries[0]["per_job"])
        header = ["policy", "violations", "mean_cores"] + [f"{j}_finish" for j in jobs]
        rows = [[_variant(c), str(s["violations"]), f"{s['mean_cores']:.2f}"]
                + [f"{s['per_job'][j]['finish']:.1f}" if s["per_job"][j]["finish"] is not None else "-"
                   for j in jobs]
                for c, s in zip(cfgs, summaries)]
    elif kind == "federation":
        header = ["trajectory", "final_ac_eval", "reached", "total_epochs", "epochs"]
        rows = [[_variant(c), f"{s['final_ac_eval']:.4f}", "yes" if s["reached"] else "no",
                 str(s["total_epochs"]), " ".join(map(str, s["epochs"]))]
                for c, s in zip(cfgs, summaries)]
    else:
        base = summaries[-1]
        header = ["policy", "violations", "mean_cores", f"violations_vs_{_variant(cfgs[-1])}",
                  f"cores_vs_{_variant(cfgs[-1])}"]
        rows = []
        for c, s in zip(cfgs, summaries):
            dv = (s["violations"] / base["violations"] - 1) if base["violations"] else 0.0
            dc = s["mean_cores"] / base["mean_cores"] - 1 if base["mean_cores"] else 0.0
            rows.append([_variant(c), str(s["violations"]), f"{s['mean_cores']:.2f}",
                         f"{dv:+.0%}", f"{dc:+.0%}"])
    return [header] + rows


def cmd_compare(args) -> int:
    base = load_scenario(args.scenario)
    names = args.policies or list(STRATEGIES[base.kind])
    cfgs = [with_overrides(base, seed=args.seed, strategy=n) for n in names]
    out = _out_dir(args)
    summaries = []
    for cfg, n in zip(cfgs, names):
        paths = write_result(run_scenario(cfg), out, f"{cfg.name}.{n}", args.format)
        summaries.append(summarize_file(paths["rows"], threshold(cfg)))
    table = _compare_rows(cfgs, summaries)
    widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
    for r in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return EXIT_OK


def cmd_replicate(args) -> int:
    names = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    failed = []
    for name in names:
        report = replicate(name)
        for line in report.lines():
            print(line)
        failed += [f"{name}: {c.name}" for c in report.checks if not c.passed]
    if failed:
        print("replication failed:\n  " + "\n  ".join(failed), file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlsched", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario YAML file")
        sp.add_argument("--out", help="output directory (default: next to the scenario)")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="row file format; a JSON summary is always written")

    run = sub.add_parser("run", help="run one scenario")
    common(run)
    run.add_argument("--policy", help="policy id override")
    run.add_argument("--strategy", help="variant override: fifo|edf|proportional, linear|quadratic, roma|rules")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run several policies on the same workload and seed")
    common(cmp_)
    cmp_.add_argument("--policy", dest="policies", action="append",
                      help="policy or variant to include; repeat (default: all for the kind)")
    cmp_.set_defaults(func=cmd_compare)

    rep = sub.add_parser("replicate", help="run a bundled experiment and check it")
    rep.add_argument("experiment", choices=EXPERIMENTS + ("all",))
    rep.set_defaults(func=cmd_replicate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
