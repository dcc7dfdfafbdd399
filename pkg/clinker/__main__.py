import sys

from clinker.cli.cli_pipeline_commands import main

sys.exit(main())
