"""Test package for semnav."""
