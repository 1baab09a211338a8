import sys

from bandit_dopd.cli import main

sys.exit(main())
