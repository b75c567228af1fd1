#!/usr/bin/env python3
"""
sh-transfer - Main Entry Point

This module allows the package to be run as a module:
    python -m shtransfer {run,emit_table,selfcheck} [options]
"""

from .shtransfer import main  # pylint: disable=import-error

if __name__ == "__main__":
    main()
