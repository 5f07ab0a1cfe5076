#!/usr/bin/env python3
"""
Main entry point for the PSWF reconstruction toolkit.

Usage:
    python run.py <subcommand> [OPTIONS]

Examples:
    python run.py pswf table --c 10 --n 15
    python run.py sweep --config sweep.json --out runs/sweep
"""

from pswf_recon.cli import main

if __name__ == "__main__":
    main()
