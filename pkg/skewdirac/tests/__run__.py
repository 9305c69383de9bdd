import argparse
import os
import subprocess
import sys
import time

parser = argparse.ArgumentParser(description="Run every skewdirac test module.")
parser.add_argument(
    "--debug", action="store_true", help="Print the command used for each module"
)
parser.add_argument(
    "--only",
    action="append",
    default=[],
    help="Run only this module (e.g. weyl_test), may be repeated",
)
args = parser.parse_args()

tests_dir = os.path.dirname(os.path.abspath(__file__))
modules = sorted(name[:-3] for name in os.listdir(tests_dir) if name.endswith("_test.py"))
if args.only:
    missing = sorted(set(args.only) - set(modules))
    if missing:
        print(f"Unknown test modules: {', '.join(missing)}")
        sys.exit(2)
    modules = [name for name in modules if name in args.only]

failures = []
for module in modules:
    cmd = [sys.executable, "-m", f"skewdirac.tests.{module}"]
    if args.debug:
        print(f"Command: {' '.join(cmd)}")

    started = time.perf_counter()
    result = subprocess.run(cmd, capture_output=True, text=True)
    elapsed = time.perf_counter() - started

    # INFO logging also lands on stderr; only tracebacks and exit codes count
    if result.returncode != 0 or "Traceback" in result.stderr:
        print(f"[FAIL] {module} ({elapsed:.1f}s)")
        print(result.stderr)
        failures.append(module)
    else:
        print(f"[ ok ] {module} ({elapsed:.1f}s)")

print(f"{len(modules) - len(failures)} of {len(modules)} test modules passed.")
if failures:
    print(f"Failed: {', '.join(failures)}")
    sys.exit(1)
sys.exit(0)
