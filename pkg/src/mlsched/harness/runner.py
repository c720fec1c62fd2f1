"""Build simulations from a scenario and collect their result rows."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..batch import BatchJob, BatchPolicy, BatchSimulation, StageSpec
from ..core import NodeSpec
from ..federation import FederationConfig, LearningCurveOracle, run_federation
from ..serving import InferenceService, ServingPolicy, ServingSimulation
from .arrivals import gen_arrivals
from .export import summarize_rows, table
from .rng import substream
from .scenario import ScenarioConfig


@dataclass
class RunResult:
    scenario: ScenarioConfig
    rows: list[dict]
    summary: dict
    extra: dict = field(default_factory=dict)  # in-memory objects for property checks; not exported


def nodes_of(cfg: ScenarioConfig) -> list[NodeSpec]:
    return [NodeSpec(n["id"], n["cores"], n["memory"], n.get("gpus", 0)) for n in cfg.cluster]


def batch_jobs(cfg: ScenarioConfig) -> list[BatchJob]:
    jobs = []
    for j in cfg.workload["jobs"]:
        stages = tuple(StageSpec(s["id"], s["records"], s["rate"], tuple(s["deps"]), s["shuffle"])
                       for s in j["stages"])
        jobs.append(BatchJob(j["id"], j["submit"], j["deadline"], stages, j["memory"]))
    return jobs


def services_of(cfg: ScenarioConfig) -> list[InferenceService]:
    return [InferenceService(s["id"], s["sla_rt"], s["cpu_time_1core"], s["gpu_time"],
                             s["aggregator"], s["window"]) for s in cfg.workload["services"]]


def serving_arrivals(cfg: ScenarioConfig) -> dict[str, list[float]]:
    duration = cfg.duration
    return {sid: gen_arrivals(spec, substream(cfg.seed, f"arrivals.{sid}"), duration)
            for sid, spec in cfg.workload["arrivals"].items()}


def _run_batch(cfg: ScenarioConfig, instrument) -> tuple[list[dict], dict]:
    jobs = batch_jobs(cfg)
    policy = BatchPolicy(cfg.policy.id, **cfg.policy.params)
    sim = BatchSimulation(nodes_of(cfg), jobs, policy, cfg.control_period)
    if instrument:
        instrument(sim)
    sim.run(cfg.duration)
    by_id = {r["job_id"]: r for r in sim.job_rows()}
    rows = [by_id[j.id] for j in sorted(jobs, key=lambda j: (j.submit_time, j.id))]
    return rows, {"sim": sim}


def _run_federation(cfg: ScenarioConfig, instrument) -> tuple[list[dict], dict]:
    w = cfg.workload
    fed = FederationConfig(trajectory=cfg.policy.params["trajectory"], **w["federation"])
    orc = dict(w["oracle"])
    jitter_sd = orc.pop("jitter_sd")
    jitter = tuple(orc.pop("jitter"))
    if not jitter and jitter_sd > 0:
        jitter = tuple(float(x) for x in
                       substream(cfg.seed, "federation.jitter").normal(0.0, jitter_sd, fed.node_count))
    oracle = LearningCurveOracle(jitter=jitter, **orc)
    log = run_federation(fed, oracle, substream(cfg.seed, "federation.noise"))
    return log.rounds, {"log": log, "config": fed, "oracle": oracle}


def _run_serving(cfg: ScenarioConfig, instrument) -> tuple[list[dict], dict]:
    arrivals = serving_arrivals(cfg)
    policy = ServingPolicy(cfg.policy.id, **cfg.policy.params)
    sim = ServingSimulation(nodes_of(cfg), services_of(cfg), arrivals, policy,
                            cfg.control_period, cfg.duration)
    if instrument:
        instrument(sim)
    sim.run()
    return sim.sla_report()["windows"], {"sim": sim, "arrivals": arrivals}


_RUNNERS = {"batch": _run_batch, "federation": _run_federation, "serving": _run_serving}


def threshold(cfg: ScenarioConfig) -> float | None:
    if cfg.kind == "federation":
        return cfg.workload["federation"]["ac_sla"]
    return None


def run_scenario(cfg: ScenarioConfig, instrument=None) -> RunResult:
    """Run ``cfg`` once; the summary is computed from the exported table, not the live objects.

    ``instrument(sim)``, if given, is called on a batch or serving simulation
    before it runs (to attach observers).
    """
    rows, extra = _RUNNERS[cfg.kind](cfg, instrument)
    exported = table(cfg.kind, rows)
    return RunResult(cfg, exported, summarize_rows(cfg.kind, exported, threshold(cfg)), extra)
