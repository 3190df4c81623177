"""CLI entry point for polarlab.

Subcommands construct, encode, decode, simulate, compare, steps and
sweep-crc; see :mod:`polarlab.cli`.
"""

import sys

from polarlab.cli import run_command


def main(args: list[str] | None = None) -> int:
    """Main CLI entry point."""
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
