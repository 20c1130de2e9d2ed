import sys

from tokompiler.cli import main

sys.exit(main())
