"""Ziv-Zakai bounds and pilot power allocation for OFDM time-of-arrival ranging."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
