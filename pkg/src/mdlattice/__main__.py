import sys

from mdlattice.cli import main

sys.exit(main())
