"""Named, independent random streams derived from one master seed."""
import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """Stable 64-bit seed for ``(master, *labels)``; platform independent."""
    key = ":".join([str(int(master))] + [str(l) for l in labels])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def stream(master: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *labels)))
