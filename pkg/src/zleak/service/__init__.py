"""FastAPI service wrapping the toolkit; the CLI is a thin client of it."""

from .app import app

__all__ = ["app"]
