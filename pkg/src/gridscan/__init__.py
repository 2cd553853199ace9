"""Grid-graph algorithms with exact external-memory I/O accounting."""

__version__ = "0.1.0"
