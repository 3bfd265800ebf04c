import sys

from viralimpact.cli import main

sys.exit(main())
