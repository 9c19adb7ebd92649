import sys

from nrsense.cli import main

sys.exit(main())
