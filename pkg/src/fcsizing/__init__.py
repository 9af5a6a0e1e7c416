"""Sizing PV and battery capacity for an islanded gas-turbine grid under frequency-stability limits."""

__version__ = "0.1.0"
