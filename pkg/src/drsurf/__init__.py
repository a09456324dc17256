"""Discrete Riemann surfaces: quad-graphs, periods, critical maps and electrical moves."""
__version__ = "0.1.0"
