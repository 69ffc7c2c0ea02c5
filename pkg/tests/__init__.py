"""Test package for qconfine."""
