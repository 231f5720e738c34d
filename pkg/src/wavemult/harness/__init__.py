"""Configuration, record persistence and the command-line interface."""

from .cli import run

__all__ = ["run"]
