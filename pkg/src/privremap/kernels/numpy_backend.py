"""Pure-numpy kernels. Same stream layout and arithmetic as the numba ones."""

import numpy as np

from ..estimators import (
    PLAN_GM0, PLAN_GM1, PLAN_GX0, PLAN_GX1, PLAN_LOGPDET, PLAN_N00, PLAN_N01,
    PLAN_N11, PLAN_P00, PLAN_P01, PLAN_P11, PLAN_RANK, PLAN_TOL_SCALE,
)
from ._layout import (
    DOMAIN_COIN, DOMAIN_TRACE, DOMAIN_WORLD, LOG_2PI, MASK32, PHILOX_M0, PHILOX_M1,
    PHILOX_W0, PHILOX_W1, SHIFT5, SHIFT6, SHIFT32, STAT_HEAD_POST, STAT_HEADS,
    STAT_M_M2, STAT_M_MEAN, STAT_N, STAT_P_M2, STAT_P_MEAN, STAT_U_M2, STAT_U_MEAN,
    STAT_WIDTH, TWO26, TWO_M53, TWO_PI,
)

name = "numpy"


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on uint64 arrays holding 32-bit words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = (p1 >> SHIFT32) ^ c1 ^ k0, p1 & MASK32, (p0 >> SHIFT32) ^ c3 ^ k1, p0 & MASK32
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


def _u53(hi, lo):
    return ((hi >> SHIFT5).astype(np.float64) * TWO26 + (lo >> SHIFT6).astype(np.float64)) * TWO_M53


def _normals(words):
    u1 = _u53(words[0], words[1])
    u2 = _u53(words[2], words[3])
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    theta = TWO_PI * u2
    return r * np.cos(theta), r * np.sin(theta)


def _index_words(start, count):
    idx = np.arange(start, start + count, dtype=np.uint64)
    return idx & MASK32, idx >> SHIFT32


def world_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin):
    """Arrays ``(mu, s, w, e, x, y, mu_check, y_r, head)`` for samples
    ``start .. start + count - 1``."""
    lo, hi = _index_words(start, count)
    dom = np.uint64(DOMAIN_WORLD)
    n_mu, n_s = _normals(philox4x32(lo, hi, dom, np.uint64(0), k0, k1))
    n_w, n_e = _normals(philox4x32(lo, hi, dom, np.uint64(1), k0, k1))
    coin_words = philox4x32(lo, hi, dom, np.uint64(2), k0, k1)
    u_coin = _u53(coin_words[0], coin_words[1])
    mu = sd_mu * n_mu
    s = sd_s * n_s
    w = sd_w * n_w
    e = sd_e * n_e
    x = mu + s
    y = x + w
    mc = mu + e
    if a <= b:
        yr = y + a * (mu - y)
    else:
        yr = mu + b * (y - mu)
    head = u_coin < p_coin
    return mu, s, w, e, x, y, mc, yr, head


def _branch_loglik(plan, z, mc):
    rank = plan[PLAN_RANK]
    quad = plan[PLAN_P00] * z * z + 2.0 * plan[PLAN_P01] * z * mc + plan[PLAN_P11] * mc * mc
    ll = -0.5 * (quad + plan[PLAN_LOGPDET] + rank * LOG_2PI)
    if rank >= 2:
        return np.ones(z.shape, dtype=bool), ll
    n0 = plan[PLAN_N00] * z + plan[PLAN_N01] * mc
    n1 = plan[PLAN_N01] * z + plan[PLAN_N11] * mc
    tol = 1e-9 * (1.0 + np.maximum(np.abs(z), np.abs(mc)) + plan[PLAN_TOL_SCALE])
    ok = np.sqrt(n0 * n0 + n1 * n1) <= tol
    return ok, np.where(ok, ll, -np.inf)


def head_weights(z, mc, p, plan_h, plan_t):
    if p <= 0.0:
        return np.zeros(z.shape)
    if p >= 1.0:
        return np.ones(z.shape)
    ok_h, ll_h = _branch_loglik(plan_h, z, mc)
    ok_t, ll_t = _branch_loglik(plan_t, z, mc)
    rank_h, rank_t = plan_h[PLAN_RANK], plan_t[PLAN_RANK]
    d = np.log(p) - np.log1p(-p) + (ll_h - ll_t)
    with np.errstate(over="ignore", invalid="ignore"):
        ed = np.exp(-np.abs(d))
        w = np.where(d >= 0, 1.0 / (1.0 + ed), ed / (1.0 + ed))
    w = np.where(ll_h == ll_t, p, w)
    both = ok_h & ok_t
    if rank_h != rank_t:
        w = np.where(both, 1.0 if rank_h < rank_t else 0.0, w)
    w = np.where(ok_h & ~ok_t, 1.0, w)
    w = np.where(ok_t & ~ok_h, 0.0, w)
    w = np.where(~ok_h & ~ok_t, p, w)
    return w


def estimate(z, mc, p, plan_h, plan_t):
    """Vectorized mixture adversary: ``(head_posterior, x_hat, mu_hat)``."""
    w = head_weights(z, mc, p, plan_h, plan_t)
    xh = plan_h[PLAN_GX0] * z + plan_h[PLAN_GX1] * mc
    mh = plan_h[PLAN_GM0] * z + plan_h[PLAN_GM1] * mc
    xt = plan_t[PLAN_GX0] * z + plan_t[PLAN_GX1] * mc
    mt = plan_t[PLAN_GM0] * z + plan_t[PLAN_GM1] * mc
    x_hat = np.where(w == 1.0, xh, np.where(w == 0.0, xt, w * xh + (1.0 - w) * xt))
    mu_hat = np.where(w == 1.0, mh, np.where(w == 0.0, mt, w * mh + (1.0 - w) * mt))
    return w, x_hat, mu_hat


def _mean_m2(v):
    mean = np.sum(v) / v.size
    d = v - mean
    return mean, np.sum(d * d)


def simulate_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin, plan_h, plan_t):
    mu, _, _, _, x, y, mc, yr, head = world_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin)
    z = np.where(head, yr, y)
    w, x_hat, mu_hat = estimate(z, mc, p_coin, plan_h, plan_t)
    out = np.zeros(STAT_WIDTH)
    out[STAT_N] = count
    out[STAT_U_MEAN], out[STAT_U_M2] = _mean_m2((z - x) ** 2)
    out[STAT_P_MEAN], out[STAT_P_M2] = _mean_m2((x_hat - x) ** 2)
    out[STAT_M_MEAN], out[STAT_M_M2] = _mean_m2((mu_hat - mu) ** 2)
    out[STAT_HEADS] = np.count_nonzero(head)
    out[STAT_HEAD_POST] = np.sum(w)
    return out


def trace_draws(k0, k1, n_records, dim):
    """Standard normals ``(n_records, dim)`` and per-record coin uniforms."""
    lo, hi = _index_words(0, n_records)
    normals = np.empty((n_records, dim))
    for c in range(dim):
        normals[:, c] = _normals(philox4x32(lo, hi, np.uint64(DOMAIN_TRACE), np.uint64(c), k0, k1))[0]
    coin = philox4x32(lo, hi, np.uint64(DOMAIN_COIN), np.uint64(0), k0, k1)
    return normals, _u53(coin[0], coin[1])
