import sys

from strainscope.cli import main

sys.exit(main())
