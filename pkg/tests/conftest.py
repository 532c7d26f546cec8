import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
MNIST_DIR = ROOT / "data" / "mnist"
MNIST_IMAGES = MNIST_DIR / "images-idx3-ubyte"
MNIST_LABELS = MNIST_DIR / "labels-idx1-ubyte"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_paths():
    """Paths of the 5000-image MNIST pool; built from mlxtend if missing."""
    if not (MNIST_IMAGES.exists() and MNIST_LABELS.exists()):
        if importlib.util.find_spec("mlxtend") is None:
            pytest.skip("MNIST pool missing and mlxtend not installed")
        sys.path.insert(0, str(ROOT / "scripts"))
        from build_mnist_subset import build

        build(MNIST_DIR)
    return MNIST_IMAGES, MNIST_LABELS


@pytest.fixture(scope="session")
def mnist(mnist_paths):
    from einsteindr.data import load_idx

    return load_idx(*mnist_paths)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
