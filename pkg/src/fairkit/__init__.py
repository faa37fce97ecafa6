"""Fairness auditing and bias mitigation for binary tabular classifiers."""

__version__ = "0.1.0"
