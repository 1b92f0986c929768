from nestedrisk.cli import main
import sys

sys.exit(main())
