"""Counter-based random streams (Philox) for reproducible ensembles.

Streams are addressed by (master_seed, run, trajectory, step, substream);
the key carries (master_seed, run) and the counter carries
(0, trajectory, step, substream), so any two distinct tuples give
non-overlapping counter ranges as long as fewer than 2^66 values are drawn
per stream. Vectorized kernels draw whole per-step blocks from the
trajectory-0 stream of a substream; results are then independent of any
thread scheduling because generation is centralized per step.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# Substream labels. Block draws and per-tuple draws use disjoint labels so
# the two addressing modes can never alias.
SUB_TOTAL_ALPHA = 0
SUB_TOTAL_BETA = 1
SUB_TOTAL_SHARED = 2
SUB_COND_REAL = 3
SUB_COND_FICT_ALPHA = 4
SUB_COND_FICT_BETA = 5
SUB_ORACLE_WIENER = 6
SUB_INIT = 7


def philox(master_seed, run=0, trajectory=0, step=0, substream=0):
    """Raw Philox bit generator for one addressed stream."""
    for name, v in (("run", run), ("trajectory", trajectory), ("step", step), ("substream", substream)):
        if v < 0:
            raise ValueError(f"{name} index must be nonnegative")
    key = np.array([master_seed & MASK64, run & MASK64], dtype=np.uint64)
    counter = np.array([0, trajectory & MASK64, step & MASK64, substream & MASK64], dtype=np.uint64)
    return np.random.Philox(counter=counter, key=key)


def seed_streams(master_seed, trajectory, step, substream, run=0):
    """np.random.Generator for the addressed stream; same tuple, same sequence."""
    return np.random.Generator(philox(master_seed, run, trajectory, step, substream))


def normal_block(master_seed, run, step, substream, shape):
    """Standard-normal block for one (run, step, substream); trajectory-major layout."""
    gen = seed_streams(master_seed, 0, step, substream, run=run)
    return gen.standard_normal(shape)
