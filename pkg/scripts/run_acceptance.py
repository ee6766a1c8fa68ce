"""Print the acceptance summary (one PASS/FAIL line per criterion)."""
import pathlib
import sys

import pytest

here = pathlib.Path(__file__).resolve().parents[1]
sys.exit(pytest.main([str(here / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"]))
