"""SAC thermal control of a multi-core node with windowed alpha supervision."""

__version__ = "0.1.0"
