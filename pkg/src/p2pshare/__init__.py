"""Peer-to-peer risk sharing on social networks: graphs, settlement, optimization, analytics."""

from ._version import __version__

__all__ = ["__version__"]
