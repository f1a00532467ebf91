#!/usr/bin/env python3
"""Throughput comparison of the compiled and pure-numpy backends.

Equivalent to `smallmass bench`; kept as a script so the numbers are easy
to regenerate and archive:

    python benchmarks/bench_backends.py --chains 512 --steps 20000
"""
import sys

from smallmass.cli import main

if __name__ == "__main__":
    sys.exit(main(["bench", *sys.argv[1:]]))
