import sys

import RECODE.cli

#same as the installed `recode` command, for running from a source checkout:
#   python recode_cmd.py experiment FLX_DE-Hai_FULLSET_HH.csv --preset table1
sys.exit(RECODE.cli.main())
