import sys

from vanetsim.cli import main

sys.exit(main())
