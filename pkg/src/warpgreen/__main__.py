import sys

from warpgreen.cli import main

sys.exit(main())
