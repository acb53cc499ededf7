import sys

from manifold_kinetics.cli import main

sys.exit(main())
