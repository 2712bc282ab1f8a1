"""
RAVE Command Line - Launch point for training, coding and benchmarking
"""

import os

# BLAS threads default to one
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import logging  # noqa: E402
import sys  # noqa: E402

from dotenv import load_dotenv  # noqa: E402

load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.environ.get("RAVE_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

from cli.main import main  # noqa: E402

logger = logging.getLogger(__name__)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)
