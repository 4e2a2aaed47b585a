#!/usr/bin/env python3
"""
Test suite driver for Boost-R.
Runs every test module in its own pytest process and prints a summary.
"""

import argparse
import os
import subprocess
import sys

TEST_DIR = os.path.dirname(os.path.abspath(__file__))
REPO_ROOT = os.path.dirname(TEST_DIR)

TEST_MODULES = [
    "test_data.py",
    "test_io.py",
    "test_splines.py",
    "test_boost_static.py",
    "test_group_lasso.py",
    "test_boost_dynamic.py",
    "test_simulate.py",
    "test_baselines.py",
    "test_metrics.py",
    "test_validation.py",
    "test_model_store.py",
    "test_csv_exporter.py",
    "test_run_config.py",
    "test_cli.py",
]

SLOW_MODULES = ["test_acceptance.py"]


def run_test_module(module_name, timeout):
    """Run one test module with pytest and capture its output."""
    print(f"\n{'=' * 60}")
    print(f"Running {module_name}...")
    print('=' * 60)
    try:
        result = subprocess.run([sys.executable, "-m", "pytest", "-q", os.path.join(TEST_DIR, module_name)],
                                capture_output=True, text=True, timeout=timeout, cwd=REPO_ROOT)
    except subprocess.TimeoutExpired:
        print(f"{module_name} timed out after {timeout} s")
        return False
    print(result.stdout)
    if result.returncode != 0:
        print(result.stderr)
    return result.returncode == 0


def main():
    """Run all test modules and provide summary."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--slow", action="store_true", help="also run the full-size acceptance runs")
    parser.add_argument("--timeout", type=int, default=600, help="seconds per module")
    args = parser.parse_args()

    modules = TEST_MODULES + (SLOW_MODULES if args.slow else [])
    results = [(module, run_test_module(module, args.timeout)) for module in modules]

    print(f"\n{'=' * 60}")
    print("TEST SUITE SUMMARY")
    print('=' * 60)
    for module, success in results:
        print(f"{module:<35} {'PASSED' if success else 'FAILED'}")
    passed = sum(success for _, success in results)
    print(f"\nOverall: {passed}/{len(results)} modules passed")
    if passed != len(results):
        sys.exit(1)


if __name__ == "__main__":
    main()
