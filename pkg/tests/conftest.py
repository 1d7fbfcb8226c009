import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flinthills.numkernel import (
    GoldenSource,
    PiSource,
    PrecisionPolicy,
    Sqrt2Source,
)


@pytest.fixture(scope="session")
def policy():
    return PrecisionPolicy()


@pytest.fixture(scope="session")
def sources():
    return {"pi": PiSource(), "sqrt2": Sqrt2Source(), "golden": GoldenSource()}
