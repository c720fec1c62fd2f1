"""Discrete-event simulator and resource controllers for training and serving ML workloads."""

__version__ = "0.1.0"
