"""Snowy night-to-day translation, road-scene segmentation and snow hazard indexing."""

__version__ = "0.1.0"
