"""Variational bound states of muonic helium in an exponential basis, at arbitrary precision."""

__version__ = "0.1.0"
