#!/usr/bin/env python3
"""
Script to generate sample kernels and benchmark CSVs for staticdeps.
"""
import sys
import os
import argparse

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from staticdeps.utils.logger import setup_logger
from staticdeps.utils.mock_data import MockDataGenerator


def main():
    """Generate mock data for development and testing."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument('directory', nargs='?', default='mock_data',
                        help='Output directory (default: mock_data)')
    parser.add_argument('--seed', type=int, default=0, help='Generator seed')
    parser.add_argument('--kernels', type=int, default=5, help='Random kernels to write')
    parser.add_argument('--benchmarks', type=int, default=20,
                        help='Benchmarks in the prediction CSV')
    args = parser.parse_args()

    setup_logger(level='INFO')

    generator = MockDataGenerator(seed=args.seed)
    written = generator.write_all(args.directory, kernels=args.kernels,
                                  benchmarks=args.benchmarks)

    for path in written:
        print(path)
    print(f"\nTry: staticdeps cov {args.directory}/kernels/*.s")
    print(f"     staticdeps stats {args.directory}/predictions.csv "
          f"{args.directory}/baselines.csv --best")


if __name__ == "__main__":
    main()
