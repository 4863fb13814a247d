"""Shared helpers: run configuration, logging setup, version stamp and image output."""
