#!/usr/bin/env python3
"""
Test runner for sh-transfer.

This script provides convenient ways to run the test suite with different configurations.
"""

import argparse
import importlib.util
import subprocess
import sys
from typing import List


def run_command(cmd: List[str], description: str) -> bool:
    """Run a command and return success status."""
    print(f"\n{'=' * 60}")
    print(f"Running: {description}")
    print(f"Command: {' '.join(cmd)}")
    print("=" * 60)

    result = subprocess.run(cmd, capture_output=False, check=False)

    if result.returncode == 0:
        print(f"\n{description} completed successfully")
        return True
    print(f"\n{description} failed with return code {result.returncode}")
    return False


def available(module: str) -> bool:
    return importlib.util.find_spec(module) is not None


def main() -> None:
    """Main test runner function."""
    parser = argparse.ArgumentParser(description="Run sh-transfer tests")
    parser.add_argument("--unit", action="store_true", help="Run unit tests only")
    parser.add_argument("--integration", action="store_true", help="Run integration tests only")
    parser.add_argument("--cli", action="store_true", help="Run CLI tests only")
    parser.add_argument("--property", action="store_true", help="Run hypothesis tests only")
    parser.add_argument("--fast", action="store_true", help="Skip slow tests")
    parser.add_argument("--coverage", action="store_true", help="Run with coverage reporting")
    parser.add_argument("--format", action="store_true", help="Run code formatting checks")
    parser.add_argument("--lint", action="store_true", help="Run linting and type checks")
    parser.add_argument("--all", action="store_true", help="Run tests, format and lint")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")

    args = parser.parse_args()

    if args.all:
        run_format = run_lint = run_tests = True
    else:
        run_format = args.format
        run_lint = args.lint
        run_tests = not (args.format or args.lint)

    success = True

    if run_format:
        for module, cmd, description in (
            ("black", ["--check", "src/", "tests/"], "Black formatting check"),
            ("isort", ["--check-only", "src/", "tests/"], "Import sorting check"),
        ):
            if not available(module):
                print(f"{module} not available, skipping {description.lower()}")
            elif not run_command([sys.executable, "-m", module, *cmd], description):
                success = False

    if run_lint:
        for module, cmd, description in (
            ("flake8", ["--max-line-length", "88", "src/"], "Flake8 linting"),
            ("mypy", ["src/shtransfer"], "Type checking"),
        ):
            if not available(module):
                print(f"{module} not available, skipping {description.lower()}")
            elif not run_command([sys.executable, "-m", module, *cmd], description):
                success = False

    if run_tests:
        pytest_cmd = [sys.executable, "-m", "pytest"]
        if args.verbose:
            pytest_cmd.append("-v")
        if args.coverage:
            pytest_cmd.extend(["--cov=src/shtransfer", "--cov-report=term-missing"])

        if args.unit:
            pytest_cmd.extend(["-m", "unit"])
        elif args.integration:
            pytest_cmd.extend(["-m", "integration"])
        elif args.cli:
            pytest_cmd.extend(["-m", "cli"])
        elif args.property:
            pytest_cmd.extend(["-m", "property"])
        elif args.fast:
            pytest_cmd.extend(["-m", "not slow"])

        if not run_command(pytest_cmd, "Pytest test suite"):
            success = False

    print("\n" + "=" * 60)
    if success:
        print("All checks completed successfully")
        sys.exit(0)
    print("Some checks failed. Please review the output above.")
    sys.exit(1)


if __name__ == "__main__":
    main()
