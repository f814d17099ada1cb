"""
HTTP service for the TPIA solver.
"""

from .app import app

__all__ = ["app"]
