"""FastAPI gateway: JSON/WebSocket surface for the operator console."""

from .app import create_app
from .live import LiveFleet

__all__ = ["create_app", "LiveFleet"]
