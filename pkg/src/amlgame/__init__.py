"""Defense/attack games around a deep-learning spectrum sensor."""

__version__ = "0.1.0"
