"""Ultrastrong-coupling circuit QED: dressed spectra, vacuum field and open dynamics."""
__version__ = "0.1.0"
