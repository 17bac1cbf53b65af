"""Runtime and size bounds for integer loops and integer programs."""

__version__ = "0.1.0"
