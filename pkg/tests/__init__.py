"""Tests for mumkit."""
