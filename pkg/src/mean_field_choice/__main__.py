"""Entry point for the mean-field choice toolkit."""

import sys

from .cli import run


def main() -> None:
    """Run the command-line interface."""
    sys.exit(run())


if __name__ == "__main__":
    main()
