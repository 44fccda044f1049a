import sys

from certmesh.harness.cli import main

sys.exit(main())
