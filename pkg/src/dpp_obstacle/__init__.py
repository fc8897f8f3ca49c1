"""Double-obstacle p-Laplace solver via a discrete min-max dynamic programming principle."""

__version__ = "0.1.0"
