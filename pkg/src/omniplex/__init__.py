"""Joint spectral embedding of multiplex networks under the ESRDPG."""

__version__ = "0.1.0"
