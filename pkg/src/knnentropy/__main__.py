import sys

from knnentropy.cli import main

sys.exit(main())
