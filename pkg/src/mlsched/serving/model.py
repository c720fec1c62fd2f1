from __future__ import annotations

from dataclasses import dataclass, field

from ..core import NodeSpec

AGGREGATORS = ("max", "p95")


class UnknownService(KeyError):
    pass


@dataclass(frozen=True)
class InferenceService:
    id: str
    sla_rt: float
    cpu_time_1core: float
    gpu_time: float
    aggregator: str = "max"
    window: float = 10.0

    def __post_init__(self):
        if not self.sla_rt > 0:
            raise ValueError(f"service {self.id}: sla_rt must be > 0")
        if not 0 < self.gpu_time <= self.cpu_time_1core:
            raise ValueError(f"service {self.id}: need 0 < gpu_time <= cpu_time_1core")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"service {self.id}: aggregator must be one of {AGGREGATORS}")
        if not self.window > 0:
            raise ValueError(f"service {self.id}: window must be > 0")


@dataclass
class RequestRecord:
    id: int
    service: str
    arrival: float
    start: float | None = None
    finish: float | None = None
    device: str | None = None  # "cpu" | "gpu"
    node: str | None = None

    @property
    def response_time(self) -> float:
        return self.finish - self.arrival


@dataclass
class NodeLayout:
    node: NodeSpec
    cpu_executors: dict[str, float]  # service id -> initial core grant
    gpu_executors: list[tuple[str, ...]]  # one tuple of hosted models per physical GPU


@dataclass
class ProvisionLayout:
    nodes: list[NodeLayout] = field(default_factory=list)


def provision_layout(services, node: NodeSpec) -> NodeLayout:
    """One CPU executor per service and one all-models executor per GPU, cores split evenly."""
    ids = [s.id if isinstance(s, InferenceService) else str(s) for s in services]
    share = node.cores / len(ids) if ids else 0.0
    return NodeLayout(node, {sid: share for sid in ids},
                      [tuple(ids) for _ in range(node.gpus)])
