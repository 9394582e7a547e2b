#!/usr/bin/env python3
"""Compare the numba kernel backend against the pure-numpy fallback."""
import sys

from cohortq.benchmarks import run_kernel_bench

if __name__ == "__main__":
    rows = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    run_kernel_bench(rows)
