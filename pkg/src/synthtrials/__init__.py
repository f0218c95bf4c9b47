"""Scoring, validation, and hyperparameter optimization for synthetic clinical-trial tables."""

__version__ = "0.1.0"
