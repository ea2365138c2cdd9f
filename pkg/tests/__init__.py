"""Tests for connectedness_surface."""
