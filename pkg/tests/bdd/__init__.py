"""Behaviour-driven test package."""
