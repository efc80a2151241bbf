import sys

from ptychoforge.cli import main

sys.exit(main())
