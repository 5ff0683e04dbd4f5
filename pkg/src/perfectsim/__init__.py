"""Perfect simulation of chains with complete connections."""
__version__ = "0.1.0"
