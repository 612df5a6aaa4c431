#!/usr/bin/env python3
"""
Main entry point for the MTAN Lab command line.
"""

import sys

from mtan_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())
