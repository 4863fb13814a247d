import sys

from mumkit.apps.cli import main

sys.exit(main())
