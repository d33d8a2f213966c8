#!/usr/bin/env python3
"""Run the vie-parareal command line from a source checkout."""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from vie_parareal.cli import main  # noqa: E402

if __name__ == "__main__":
    main()
