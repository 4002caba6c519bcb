"""Numeric core: maps, geometry, optimizer and sample memories."""
