"""Allow ``python -m matrix_certifier``."""

import sys

from .cli import main

sys.exit(main())
