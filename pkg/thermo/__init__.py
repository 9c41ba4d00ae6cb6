"""Transfer operators, pressure, and mean-field Gibbs measures."""

__version__ = "0.1.0"
