import sys

from secpmsim.cli import main

sys.exit(main())
