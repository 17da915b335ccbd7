"""Numerical probes of sharp L^p entropy and Nash inequalities on R^n and S^n."""

__version__ = "0.1.0"
