"""Citation imbalance analysis on paper citation networks."""

__version__ = "0.1.0"
