"""Activity recognition from qualitative spatio-temporal graphs and discrete HMMs."""

__version__ = "0.1.0"
