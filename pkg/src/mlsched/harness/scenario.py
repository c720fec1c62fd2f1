"""Scenario files: YAML on disk, validated against a bundled JSON schema.

One file describes one experiment: the cluster, the policy under test with
its parameters, the workload and the master seed. Loading resolves every
default, so ``load_scenario(dump_scenario(cfg)) == cfg``.
"""
from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from ..batch.sim import BatchPolicy
from ..federation import FederationConfig, LearningCurveOracle
from ..serving.sim import ServingPolicy

KINDS = ("batch", "federation", "serving")
POLICY_IDS = {
    "batch": ("dynaspark", "fifo"),
    "federation": ("hyperfl",),
    "serving": ("roma", "rules"),
}
DEFAULT_DURATION = {"batch": None, "federation": None, "serving": 300.0}


class ScenarioError(Exception):
    """Base for problems with a scenario file; maps to CLI exit code 2."""


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


def _schema() -> dict:
    text = resources.files(__package__).joinpath("scenario.schema.json").read_text()
    return json.loads(text)


SCHEMA = _schema()


@dataclass
class PolicySpec:
    id: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    kind: str
    cluster: list[dict[str, Any]]
    policy: PolicySpec
    workload: dict[str, Any]
    name: str = "scenario"
    seed: int = 0
    duration: float | None = None
    control_period: float = 1.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "duration": self.duration,
            "control_period": self.control_period,
            "cluster": copy.deepcopy(self.cluster),
            "policy": {"id": self.policy.id, "params": copy.deepcopy(self.policy.params)},
            "workload": copy.deepcopy(self.workload),
        }


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _check(instance, schema, prefix=()) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        # oneOf failures are unhelpful at the top; report the deepest cause instead
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ValidationError(_path(list(prefix) + list(err.absolute_path)), err.message)


_POLICY_FIELDS = {
    "batch": {f.name for f in dataclasses.fields(BatchPolicy)} - {"name"},
    "federation": {"trajectory"},
    "serving": {f.name for f in dataclasses.fields(ServingPolicy)} - {"name"},
}


def _resolve_policy(kind: str, raw: dict) -> PolicySpec:
    pid = raw["id"]
    valid = POLICY_IDS[kind]
    if pid not in valid:
        raise ValidationError("$.policy.id",
                              f"unknown policy {pid!r} for kind {kind}; valid: {', '.join(valid)}")
    params = dict(raw.get("params") or {})
    unknown = sorted(set(params) - _POLICY_FIELDS[kind])
    if unknown:
        raise ValidationError(f"$.policy.params.{unknown[0]}",
                              f"unknown parameter; valid: {', '.join(sorted(_POLICY_FIELDS[kind]))}")
    try:
        if kind == "batch":
            full = dataclasses.asdict(BatchPolicy(pid, **params))
            full["strategy"] = BatchPolicy(pid, **params).strategy.value
        elif kind == "serving":
            full = dataclasses.asdict(ServingPolicy(pid, **params))
        else:
            full = {"trajectory": FederationConfig(trajectory=params.get("trajectory", "quadratic")).trajectory.value}
    except (TypeError, ValueError) as exc:
        raise ValidationError("$.policy.params", str(exc)) from None
    full.pop("name", None)
    return PolicySpec(pid, full)


def _resolve_workload(kind: str, workload: dict) -> dict:
    _check(workload, SCHEMA["$defs"][f"{kind}_workload"], ("workload",))
    w = copy.deepcopy(workload)
    if kind == "batch":
        ids = set()
        for i, job in enumerate(w["jobs"]):
            if job["id"] in ids:
                raise ValidationError(f"$.workload.jobs[{i}].id", f"duplicate job id {job['id']!r}")
            ids.add(job["id"])
            job.setdefault("memory", 16.0)
            for st in job["stages"]:
                st.setdefault("deps", [])
                st.setdefault("shuffle", 0.0)
    elif kind == "federation":
        try:
            fed = dataclasses.asdict(FederationConfig(**w["federation"]))
            fed.pop("trajectory")
            w["federation"] = fed
            orc = dict(w["oracle"])
            jitter_sd = orc.pop("jitter_sd", 0.0)
            orc["jitter"] = list(orc.get("jitter", []))
            resolved = dataclasses.asdict(LearningCurveOracle(**{**orc, "jitter": tuple(orc["jitter"])}))
            resolved["jitter"] = list(resolved["jitter"])
            resolved["jitter_sd"] = jitter_sd
            w["oracle"] = resolved
        except (TypeError, ValueError) as exc:
            raise ValidationError("$.workload", str(exc)) from None
    else:
        ids = [s["id"] for s in w["services"]]
        for i, sid in enumerate(ids):
            if sid in ids[:i]:
                raise ValidationError(f"$.workload.services[{i}].id", f"duplicate service id {sid!r}")
        for sid in w["arrivals"]:
            if sid not in ids:
                raise ValidationError(f"$.workload.arrivals.{sid}", "no such service")
        for s in w["services"]:
            s.setdefault("aggregator", "max")
            s.setdefault("window", 10.0)
    return w


def scenario_from_dict(raw: Any) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ValidationError("$", "scenario must be a mapping")
    _check(raw, {k: v for k, v in SCHEMA.items() if k != "$defs"})
    kind = raw["kind"]
    cluster = []
    ids = set()
    for i, node in enumerate(raw["cluster"]):
        if node["id"] in ids:
            raise ValidationError(f"$.cluster[{i}].id", f"duplicate node id {node['id']!r}")
        ids.add(node["id"])
        cluster.append({"id": node["id"], "cores": node["cores"], "memory": node["memory"],
                        "gpus": node.get("gpus", 0)})
    return ScenarioConfig(
        kind=kind,
        cluster=cluster,
        policy=_resolve_policy(kind, raw["policy"]),
        workload=_resolve_workload(kind, raw["workload"]),
        name=raw.get("name", "scenario"),
        seed=raw.get("seed", 0),
        duration=raw.get("duration", DEFAULT_DURATION[kind]),
        control_period=raw.get("control_period", 1.0),
    )


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"not valid YAML: {exc}") from None
    return scenario_from_dict(raw)


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package (``fig1``, ``table1``, ``serving``)."""
    ref = resources.files("mlsched").joinpath("scenarios", f"{name}.yaml")
    return Path(str(ref))


def with_overrides(cfg: ScenarioConfig, *, seed: int | None = None, policy: str | None = None,
                   strategy: str | None = None) -> ScenarioConfig:
    """Copy of ``cfg`` with CLI overrides applied: policy, then strategy, then seed.

    ``strategy`` accepts the comparison shorthands: ``fifo``, ``edf`` and
    ``proportional`` for batch, ``linear`` and ``quadratic`` for federation,
    ``roma`` and ``rules`` for serving.
    """
    raw = cfg.to_dict()
    params = raw["policy"]["params"]
    if policy is not None:
        raw["policy"] = {"id": policy, "params": params if policy == cfg.policy.id else {}}
    if strategy is not None:
        kind = cfg.kind
        if kind == "batch" and strategy == "fifo":
            raw["policy"] = {"id": "fifo", "params": {}}
        elif kind == "batch" and strategy in ("edf", "proportional"):
            base = raw["policy"]["params"] if raw["policy"]["id"] == "dynaspark" else {}
            raw["policy"] = {"id": "dynaspark", "params": {**base, "strategy": strategy}}
        elif kind == "federation" and strategy in ("linear", "quadratic"):
            raw["policy"]["params"]["trajectory"] = strategy
        elif kind == "serving" and strategy in POLICY_IDS["serving"]:
            keep = raw["policy"]["id"] == strategy
            raw["policy"] = {"id": strategy, "params": raw["policy"]["params"] if keep else {}}
        else:
            raise ValidationError("--strategy", f"{strategy!r} does not apply to a {kind} scenario; "
                                  f"valid: {', '.join(STRATEGIES[kind])}")
    if seed is not None:
        raw["seed"] = seed
    return scenario_from_dict(raw)


STRATEGIES = {
    "batch": ("fifo", "edf", "proportional"),
    "federation": ("linear", "quadratic"),
    "serving": ("roma", "rules"),
}
