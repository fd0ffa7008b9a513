"""Prime-divisibility operators on integer windows and the combinatorics around them."""

__version__ = "0.1.0"
