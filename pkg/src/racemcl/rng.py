"""Counter-based random streams.

Every consumer derives its generator from ``(root_seed, *key)`` so results do
not depend on call order between components (simulator noise, odometry
corruption, filter sampling).
"""

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# stream namespaces
SIM_SCAN = 1
SIM_ODOM = 2
FILTER_INIT = 3
FILTER_STEP = 4
BENCH = 5
