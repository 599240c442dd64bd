"""Exact workbench for arithmetic degrees and canonical heights on model endomorphisms."""
from importlib import metadata

try:
    __version__ = metadata.version("arithdyn")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
