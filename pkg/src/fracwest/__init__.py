"""Forward and frozen-Newton inverse solvers for the fractionally damped Westervelt equation in 1D."""

__version__ = "0.1.0"
