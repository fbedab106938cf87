"""Six-dimensional movable antenna (6DMA) base station simulation and optimization."""

__version__ = "0.1.0"
