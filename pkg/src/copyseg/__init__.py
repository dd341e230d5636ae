"""Localize copied segments between video pairs and score them with a copy-overlap aware metric."""

__version__ = "0.1.0"
