"""Tests for DotFoundry."""
