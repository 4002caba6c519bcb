"""Online single-target tracker with a regression model generator."""

__version__ = "1.0.0"
