#!/usr/bin/env python3
"""
ddinfer - Model-Free Data-Driven Inference

Main executable. Samples the posterior distribution of truss states given
empirical material data by population annealing, and compares the result
with analytical reference solutions.

Usage:
    ./ddinfer.py generate --config three-bar-gauss
    ./ddinfer.py run --config three-bar-gauss --threads 4
    ./ddinfer.py oracle --config three-bar-weibull
    ./ddinfer.py study --config three-bar-gauss --repeats 10
    ./ddinfer.py ks output/three-bar-gauss/samples.csv --config three-bar-gauss

Dependencies:
    - numpy, scipy
    - pandas
    - scikit-learn

Logs go to ddinfer.log and to the terminal.
"""

import logging
import sys


def main():
    """Configure logging, then hand over to the command line interface."""
    from src.app_config import config

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.LOG_FILENAME),
            logging.StreamHandler()
        ]
    )
    logger = logging.getLogger(__name__)

    # Import here to ensure logging config is active before modules load
    from src.cli import main as cli_main

    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        sys.exit(130)
    except Exception as e:
        logger.error(f"Critical error: {e}")
        print(f"Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
