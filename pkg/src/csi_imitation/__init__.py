"""Causal imitation learning on labeled DAGs with context-specific independences."""

__version__ = "0.1.0"
