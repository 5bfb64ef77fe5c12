"""Peer neighbourhood payment mechanisms: measures, shifted partitions, updates and checks."""

__version__ = "0.1.0"
