"""hyperlab: numerical laboratory for Lyapunov-exponent rigidity of toral maps."""

__all__ = ["__version__"]
__version__ = "0.3.0"
