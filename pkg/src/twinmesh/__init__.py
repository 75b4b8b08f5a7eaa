"""Deterministic simulator for shared digital twins across a vehicle lifecycle."""

__version__ = "0.1.0"
