#!/usr/bin/env python3
"""Encoded size vs raw text vs gzip on a generated claims-like corpus."""
import sys

from cohortq.benchmarks import run_compression_bench

if __name__ == "__main__":
    events = int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000
    run_compression_bench(events)
