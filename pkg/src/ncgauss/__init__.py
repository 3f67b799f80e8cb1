"""Numerical model of the noncommutative Gauss map on the Farey AF algebra."""

__version__ = "0.1.0"
