"""Random Bell operators: quantum norms, classical bounds and Monte Carlo campaigns."""

__version__ = "0.1.0"
