"""Empirical scenario generation for EV charging, PV generation and consumer load data."""

__version__ = "0.1.0"
