"""
ERT Estimator - Main Entry Point
"""
import sys
from pathlib import Path

# Add the current directory to Python path (for local imports)
current_dir = Path(__file__).parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

from ert_estimator.cli import main  # noqa: E402
from ert_estimator.utils import setup_logging  # noqa: E402

if __name__ == "__main__":
    # Set up logging
    setup_logging()
    sys.exit(main())
