import sys

from hdqkd.cli import main

sys.exit(main())
