"""CLI entrypoint module."""

from hyperlab.cli import app


if __name__ == "__main__":
    app()
