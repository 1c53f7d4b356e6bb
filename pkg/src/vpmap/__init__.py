"""Variance-partitioning priors and MCMC for space-time disease mapping."""

__version__ = "0.1.0"
