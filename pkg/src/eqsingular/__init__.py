"""Equilibrium singular control laws under non-exponential discounting."""

__version__ = "0.1.0"
