"""Utility modules for DotFoundry."""
