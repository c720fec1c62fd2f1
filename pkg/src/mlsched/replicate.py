"""Replication checks for the bundled experiments.

Shared by ``mlsched replicate`` and the acceptance tests so both judge the
same numbers against the same thresholds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .core import CAPACITY_TOL
from .harness.runner import run_scenario
from .harness.scenario import ScenarioConfig, bundled, load_scenario, with_overrides

EXPERIMENTS = ("fig1", "table1", "serving")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class Report:
    experiment: str
    checks: list[Check] = field(default_factory=list)
    elapsed: float = 0.0
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {self.experiment}: {c.name} ({c.detail})"
                for c in self.checks]


def _base(name: str, cfg: ScenarioConfig | None) -> ScenarioConfig:
    return cfg if cfg is not None else load_scenario(bundled(name))


def replicate_fig1(cfg: ScenarioConfig | None = None, time_limit: float = 10.0) -> Report:
    cfg = _base("fig1", cfg)
    rep = Report("fig1")
    t0 = time.perf_counter()
    runs = {s: run_scenario(with_overrides(cfg, strategy=s)).summary
            for s in ("fifo", "edf", "proportional")}
    rep.elapsed = time.perf_counter() - t0
    rep.data = runs
    order = [j["id"] for j in sorted(cfg.workload["jobs"], key=lambda j: (j["submit"], j["id"]))]
    *early, last = order
    fifo = runs["fifo"]["per_job"]

    rep.add(f"FIFO violates {last}", fifo[last]["violated"] and fifo[last]["finish"] > 200,
            f"finish {fifo[last]['finish']:.1f}, deadline ratio {fifo[last]['deadline_ratio']:.3f}")
    ratios = {j: fifo[j]["budget_ratio"] for j in early}
    rep.add(f"FIFO finishes {', '.join(early)} under 0.7 of budget",
            all(r is not None and r < 0.7 for r in ratios.values()),
            ", ".join(f"{j} {r:.3f}" for j, r in ratios.items()))
    for s in ("edf", "proportional"):
        rep.add(f"{s} meets every deadline", runs[s]["violations"] == 0 and runs[s]["unfinished"] == 0,
                f"{runs[s]['violations']} violations")
    prop = runs["proportional"]["per_job"]
    rep.add("proportional completes within [0.85, 1.0] of each deadline",
            all(p["deadline_ratio"] is not None and 0.85 <= p["deadline_ratio"] <= 1.0 for p in prop.values()),
            ", ".join(f"{j} {p['deadline_ratio']:.3f}" for j, p in prop.items()))
    rep.add(f"wall clock under {time_limit:g} s", rep.elapsed < time_limit, f"{rep.elapsed:.2f} s")
    return rep


def replicate_table1(cfg: ScenarioConfig | None = None, seeds: int = 20,
                     time_limit: float = 5.0) -> Report:
    cfg = _base("table1", cfg)
    rep = Report("table1")
    ac_sla = cfg.workload["federation"]["ac_sla"]
    t0 = time.perf_counter()
    finals = {"quadratic": [], "linear": []}
    bootstrap_ok = True
    for traj in finals:
        for seed in range(seeds):
            s = run_scenario(with_overrides(cfg, strategy=traj, seed=seed)).summary
            finals[traj].append(s["final_ac_eval"])
            bootstrap_ok &= s["epochs"][:2] == [1, 1]
    rep.elapsed = time.perf_counter() - t0
    rep.data = finals
    reach = sum(a >= ac_sla for a in finals["quadratic"]) / seeds
    below = sum(ac_sla - 0.10 <= a < ac_sla for a in finals["linear"]) / seeds
    rep.add(f"quadratic reaches {ac_sla:g} in >= 90% of seeds", reach >= 0.9, f"{reach:.0%}")
    rep.add(f"linear ends in [{ac_sla - 0.10:.2f}, {ac_sla:g}) in >= 80% of seeds", below >= 0.8,
            f"{below:.0%}")
    rep.add("bootstrap rounds run one epoch", bootstrap_ok, "rounds 1-2")
    rep.add(f"wall clock under {time_limit:g} s", rep.elapsed < time_limit, f"{rep.elapsed:.2f} s")
    return rep


class ServingInvariants:
    """Observer that checks GPU work conservation after every event."""

    def __init__(self, sim):
        self.sim = sim
        self.gpu_idle_with_work = 0
        sim.engine.observe(self._after)

    def _after(self, ev) -> None:
        sim = self.sim
        if any(g.request is None for g in sim.gpus) and any(sim.queues[s] for s in sim.order):
            self.gpu_idle_with_work += 1

    def violations(self, arrivals: dict[str, list[float]]) -> dict[str, int]:
        sim = self.sim
        fifo = 0
        for sid in sim.order:
            started = [r for r in sim.requests if r.service == sid and r.start is not None]
            fifo += sum(b.start < a.start for a, b in zip(started, started[1:]))
            cpu = [r for r in started if r.device == "cpu"]
            fifo += sum(b.start < a.start for a, b in zip(cpu, cpu[1:]))
        over = 0
        for nid, node in sim.nodes.items():
            over += sum(v > node.cores + CAPACITY_TOL for _, v in sim.log.series(f"node.{nid}.cores"))
        expected = sum(sum(1 for t in times if t < sim.duration) for times in arrivals.values())
        completed = sum(1 for r in sim.requests if r.finish is not None)
        return {"gpu_idle_with_work": self.gpu_idle_with_work, "fifo_breaks": fifo,
                "capacity_breaches": over,
                "lost_requests": abs(expected - completed - sim.in_flight)}


def replicate_serving(cfg: ScenarioConfig | None = None, seeds: int = 10,
                      time_limit: float = 30.0) -> Report:
    cfg = _base("serving", cfg)
    rep = Report("serving")
    totals = {"roma": [0, 0.0], "rules": [0, 0.0]}
    invariant_breaks: dict[str, int] = {}
    t0 = time.perf_counter()
    for seed in range(seeds):
        for pol in totals:
            probes = []
            res = run_scenario(with_overrides(cfg, strategy=pol, seed=seed),
                               instrument=lambda sim: probes.append(ServingInvariants(sim)))
            totals[pol][0] += res.summary["violations"]
            totals[pol][1] += res.summary["mean_cores"]
            for k, v in probes[0].violations(res.extra["arrivals"]).items():
                invariant_breaks[k] = invariant_breaks.get(k, 0) + v
    rep.elapsed = time.perf_counter() - t0
    (rv, rc), (bv, bc) = totals["roma"], totals["rules"]
    rep.data = {"roma": {"violations": rv, "mean_cores": rc / seeds},
                "rules": {"violations": bv, "mean_cores": bc / seeds},
                "invariants": invariant_breaks}
    reduction = 1 - rv / bv if bv else 0.0
    rep.add("rules baseline violates in >= 10 windows per seed", bv / seeds >= 10,
            f"{bv / seeds:.1f} per seed")
    rep.add("roma has >= 50% fewer violation windows", bv > 0 and rv <= 0.5 * bv,
            f"{rv} vs {bv}, reduction {reduction:.0%}")
    rep.add("roma allocates no more cores on average", rc <= bc,
            f"{rc / seeds:.2f} vs {bc / seeds:.2f}, saving {1 - rc / bc:.0%}")
    rep.add("serving invariants hold on every seed", not any(invariant_breaks.values()),
            ", ".join(f"{k} {v}" for k, v in invariant_breaks.items()))
    rep.add(f"wall clock under {time_limit:g} s", rep.elapsed < time_limit, f"{rep.elapsed:.2f} s")
    return rep


REPLICATORS = {"fig1": replicate_fig1, "table1": replicate_table1, "serving": replicate_serving}


def replicate(experiment: str) -> Report:
    return REPLICATORS[experiment]()
