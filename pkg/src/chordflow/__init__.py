"""Binormal-chord Morse theory and string-topology coproduct certificates."""

__version__ = "0.1.0"
