"""HTTP service exposing encoding, decoding, evaluation, and the benchmark."""

from .app import app, create_app

__all__ = ["app", "create_app"]
