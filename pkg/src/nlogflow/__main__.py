import sys

from nlogflow.cli import main

sys.exit(main())
