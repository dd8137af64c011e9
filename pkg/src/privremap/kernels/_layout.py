"""Constants shared by both kernel backends.

Random stream layout: every draw is one Philox4x32-10 block keyed by the
64-bit seed, with counter ``(index_lo, index_hi, domain, word)``. A world
sample ``i`` uses words 0..2 of ``DOMAIN_WORLD``; a trace record ``r`` uses
word ``c`` of ``DOMAIN_TRACE`` for coordinate ``c`` and word 0 of
``DOMAIN_COIN`` for its coin.
"""

import math

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
SHIFT5 = np.uint64(5)
SHIFT6 = np.uint64(6)

DOMAIN_WORLD = 0
DOMAIN_TRACE = 1
DOMAIN_COIN = 2

TWO26 = 67108864.0
TWO_M53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi
LOG_2PI = math.log(2.0 * math.pi)

# stats vector returned by simulate_block
STAT_N = 0
STAT_U_MEAN, STAT_U_M2 = 1, 2
STAT_P_MEAN, STAT_P_M2 = 3, 4
STAT_M_MEAN, STAT_M_M2 = 5, 6
STAT_HEADS = 7
STAT_HEAD_POST = 8
STAT_WIDTH = 9


def split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32
