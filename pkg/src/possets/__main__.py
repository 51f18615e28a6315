import sys

from possets.cli import main

sys.exit(main())
