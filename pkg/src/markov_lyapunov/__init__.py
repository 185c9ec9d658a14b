"""Top Lyapunov exponents of Markovian matrix products."""

__all__ = ["__version__"]
__version__ = "1.0.0"
