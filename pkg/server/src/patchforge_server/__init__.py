"""Reference detector oracle service for black-box patch attacks."""

from .app import create_app
from .backends import ToyBlobBackend, TorchvisionBackend, load_backend

__version__ = "0.1.0"

__all__ = ["ToyBlobBackend", "TorchvisionBackend", "create_app", "load_backend"]
