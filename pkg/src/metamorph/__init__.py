"""Metamorphic-relation guided mutation, review, generation, and evaluation
for LLM code benchmarks."""

__version__ = "0.1.0"
