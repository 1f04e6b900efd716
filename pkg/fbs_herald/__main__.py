import sys

from fbs_herald.api.commands import main

sys.exit(main())
