"""Application core: configuration, errors and the command-line application."""

__all__ = ["config", "errors"]
