"""
TPIA command-line launcher.

Usage:
    python tpia.py run feeder.json --mode all --csv out.csv
    python tpia.py generate radial_ov cases/radial_ov.json --seed 3
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
