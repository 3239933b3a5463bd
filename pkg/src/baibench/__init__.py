"""Benchmark harness for fixed-budget / anytime best arm identification."""

__version__ = "0.1.0"
