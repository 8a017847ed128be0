"""Windowed preemptive coordination for embodied multi-agent teams, with baselines and a benchmark harness."""

__version__ = "0.1.0"
