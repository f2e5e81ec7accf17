import sys

from upressure.cli import main

sys.exit(main())
