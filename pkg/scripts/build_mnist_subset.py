"""Write the 5000-image MNIST pool shipped with mlxtend as IDX files.

The pool holds the first 500 training images of each digit. The full MNIST
download is not needed for the desk-scale experiments; point the config at
the official ``train-images-idx3-ubyte(.gz)`` files instead if available.

    python3 scripts/build_mnist_subset.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from einsteindr.data import write_idx


def build(outdir="data/mnist"):
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    images = np.asarray(X, dtype=np.uint8).reshape(-1, 28, 28)
    write_idx(out / "images-idx3-ubyte", out / "labels-idx1-ubyte", images, y)
    return out / "images-idx3-ubyte", out / "labels-idx1-ubyte"


if __name__ == "__main__":
    paths = build(*sys.argv[1:2])
    print("wrote", *paths)
