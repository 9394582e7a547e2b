#!/usr/bin/env python3
"""Worker throughput with 1 vs 4 execution units on one loaded store."""
import sys

from cohortq.benchmarks import run_scaling_bench

if __name__ == "__main__":
    entities = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    run_scaling_bench(entities)
