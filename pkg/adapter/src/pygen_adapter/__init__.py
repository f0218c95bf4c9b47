"""fit_sample protocol adapter for third-party tabular synthesizers."""

__version__ = "0.1.0"
