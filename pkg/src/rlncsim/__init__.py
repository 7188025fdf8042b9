"""Random linear network coding over lossy packet networks: simulation and analysis."""

__version__ = "0.1.0"
