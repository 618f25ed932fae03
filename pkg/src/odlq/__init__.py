"""Harvesting and quality metrics for Open Data portal metadata."""

__version__ = "0.1.0"
