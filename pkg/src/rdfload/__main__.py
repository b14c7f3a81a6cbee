import sys

from rdfload.cli import main

sys.exit(main())
