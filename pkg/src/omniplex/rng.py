"""Counter-based random streams keyed by (seed, *indices).

Every replicate draws from its own Philox stream so results do not depend on
execution order or worker count.
"""

import numpy as np


def stream(seed, *keys):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))
