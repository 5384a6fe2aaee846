import sys

from tempofuse.cli import main

sys.exit(main())
