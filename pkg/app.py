"""
Boost-R - Main Command-Line Entry Point

Gradient-boosted additive trees for the cumulative intensity of recurrent
events, with simulators, baselines, cross-validation and CSV exports.

Features:
- Static-feature boosting with curve-valued leaves
- Dynamic-feature boosting with group-lasso spline leaves
- Benchmark simulators, baselines and metrics
- Model JSON and CSV exports of traces, partitions and surfaces

Usage: python app.py <simulate|train|predict|evaluate|importance|tune|export> [flags]
"""

import sys

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
