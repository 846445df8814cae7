"""Entry point: ``python main.py <subcommand> ...`` is the same as ``hlk <subcommand> ...``."""
import sys

from cli import main

if __name__ == "__main__":
    sys.exit(main())
