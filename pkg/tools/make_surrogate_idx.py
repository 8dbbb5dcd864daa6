"""Build an IDX3 stand-in for the MNIST training images.

The sandbox this project was built in could not reach the MNIST mirrors, only
the npm registry. The npm ``mnist`` package (MIT, github.com/cazala/mnist)
ships real MNIST digits as per-label JSON arrays of ``byte/255`` values
rounded to 3 decimals, which round-trips to the original bytes exactly.
This script interleaves those digits in a seeded random label order and
writes a standard big-endian IDX3 file.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python tools/make_surrogate_idx.py package/src/digits tests/data/train-images-idx3-ubyte
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from plm.data import PIXELS, write_idx_images  # noqa: E402

N_IMAGES = 100
SEED = 20150903


def main(digits_dir: str, out: str) -> None:
    pools = []
    for label in range(10):
        flat = np.asarray(json.loads(Path(digits_dir, f"{label}.json").read_text())["data"])
        pools.append(np.rint(flat * 255.0).astype(np.uint8).reshape(-1, 28, 28))
    labels = np.random.default_rng(SEED).integers(10, size=N_IMAGES)
    taken = [0] * 10
    images = []
    for label in labels:
        images.append(pools[label][taken[label]])
        taken[label] += 1
    assert all(img.size == PIXELS for img in images)
    write_idx_images(np.stack(images), out)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else "tests/data/train-images-idx3-ubyte")
