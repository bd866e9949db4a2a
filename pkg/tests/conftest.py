import os
import sys
from pathlib import Path

# numba sizes its worker pool once, at import
if "numba" not in sys.modules:
    os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import pytest  # noqa: E402
from hypothesis import HealthCheck, settings  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def corpus():
    return sorted(DATA.glob("*.mtx"))
