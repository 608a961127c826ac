import sys

from trendtest.cli import main

sys.exit(main())
