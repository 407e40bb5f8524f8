import sys

from layoutmod.cli import main

sys.exit(main())
