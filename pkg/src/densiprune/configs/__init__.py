"""Bundled architecture files for the published reference configurations."""
