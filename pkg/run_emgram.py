# Empirical gramian framework: command-line launcher

import os
import sys

# Add project root to Python path
project_root = os.path.abspath(os.path.dirname(__file__))
sys.path.insert(0, project_root)

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
