"""Dependency-structure-search Bayesian optimisation and role-based multi-agent policies."""
__version__ = "0.1.0"
