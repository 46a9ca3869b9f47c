"""Prioritized semantic learning for zero-shot instance navigation."""

from __future__ import annotations

PACKAGE_NAME = "semnav"

__all__ = ["PACKAGE_NAME"]
