import sys

from smartexec.cli import main

sys.exit(main())
