"""Cloud-edge video query engine and simulation harness."""

__version__ = "0.1.0"
