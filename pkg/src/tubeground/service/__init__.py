"""FastAPI service layer: pydantic schemas and the application factory."""

from .app import app, create_app

__all__ = ["app", "create_app"]
