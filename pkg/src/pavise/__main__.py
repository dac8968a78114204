"""Allow `python -m pavise` alongside the console script."""

import sys

from .cli import main

sys.exit(main())
