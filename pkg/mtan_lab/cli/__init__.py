"""
Command-line interface module for training and inspecting multi-task networks.

This module provides the `mtan-lab` command with train, eval, gradcheck,
dump-masks, compare and params subcommands.
"""

from .cli import main

__all__ = ["main"]
