"""Inference serving: per-service queues, GPU/CPU schedulers, vertical scaling."""
from .model import InferenceService, RequestRecord, UnknownService, provision_layout
from .sched import (
    RoundRobin,
    aggregate,
    cpu_pick,
    enqueue,
    gpu_pick,
    gpu_pick_fifo,
    make_queues,
    measure_sla,
    rule_step,
    supervise,
    vscale_step,
)
from .sim import ServingPolicy, ServingSimulation

__all__ = [
    "InferenceService", "RequestRecord", "RoundRobin", "ServingPolicy", "ServingSimulation",
    "UnknownService", "aggregate", "cpu_pick", "enqueue", "gpu_pick", "gpu_pick_fifo",
    "make_queues", "measure_sla", "provision_layout", "rule_step", "supervise", "vscale_step",
]
