"""Numba-compiled kernels: one fused loop per block, no temporaries."""

import math

import numpy as np
from numba import njit

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

name = "numba"

_DOM_WORLD = np.uint64(DOMAIN_WORLD)
_DOM_TRACE = np.uint64(DOMAIN_TRACE)
_DOM_COIN = np.uint64(DOMAIN_COIN)


@njit(cache=True, nogil=True)
def _philox(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        n0 = (p1 >> SHIFT32) ^ c1 ^ k0
        n1 = p1 & MASK32
        n2 = (p0 >> SHIFT32) ^ c3 ^ k1
        n3 = p0 & MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def _u53(hi, lo):
    return (float(hi >> SHIFT5) * TWO26 + float(lo >> SHIFT6)) * TWO_M53


@njit(cache=True, nogil=True)
def _normal_pair(w0, w1, w2, w3):
    u1 = _u53(w0, w1)
    u2 = _u53(w2, w3)
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    theta = TWO_PI * u2
    return r * math.cos(theta), r * math.sin(theta)


@njit(cache=True, nogil=True)
def _philox_arrays(c0, c1, c2, c3, k0, k1):
    n = c0.shape[0]
    out = np.empty((4, n), dtype=np.uint64)
    for i in range(n):
        r0, r1, r2, r3 = _philox(c0[i], c1[i], c2[i], c3[i], np.uint64(k0), np.uint64(k1))
        out[0, i] = r0
        out[1, i] = r1
        out[2, i] = r2
        out[3, i] = r3
    return out


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on uint64 arrays holding 32-bit words."""
    c = np.broadcast_arrays(*(np.asarray(v, dtype=np.uint64) for v in (c0, c1, c2, c3)))
    shape = c[0].shape
    flat = [np.ascontiguousarray(v).reshape(-1) for v in c]
    out = _philox_arrays(flat[0], flat[1], flat[2], flat[3], np.uint64(k0), np.uint64(k1))
    return tuple(out[j].reshape(shape) for j in range(4))


@njit(cache=True, nogil=True)
def _world(k0, k1, i, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin):
    lo = np.uint64(i) & MASK32
    hi = np.uint64(i) >> SHIFT32
    w0, w1, w2, w3 = _philox(lo, hi, _DOM_WORLD, np.uint64(0), k0, k1)
    n_mu, n_s = _normal_pair(w0, w1, w2, w3)
    w0, w1, w2, w3 = _philox(lo, hi, _DOM_WORLD, np.uint64(1), k0, k1)
    n_w, n_e = _normal_pair(w0, w1, w2, w3)
    w0, w1, w2, w3 = _philox(lo, hi, _DOM_WORLD, np.uint64(2), k0, k1)
    u_coin = _u53(w0, w1)
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
    return mu, s, w, e, x, y, mc, yr, u_coin < p_coin


@njit(cache=True, nogil=True)
def _world_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin):
    out = np.empty((8, count))
    head = np.empty(count, dtype=np.bool_)
    for j in range(count):
        mu, s, w, e, x, y, mc, yr, h = _world(k0, k1, start + j, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin)
        out[0, j] = mu
        out[1, j] = s
        out[2, j] = w
        out[3, j] = e
        out[4, j] = x
        out[5, j] = y
        out[6, j] = mc
        out[7, j] = yr
        head[j] = h
    return out, head


def world_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin):
    """Arrays ``(mu, s, w, e, x, y, mu_check, y_r, head)`` for samples
    ``start .. start + count - 1``."""
    out, head = _world_block(
        np.uint64(k0), np.uint64(k1), np.uint64(start), count,
        float(sd_mu), float(sd_s), float(sd_w), float(sd_e), float(a), float(b), float(p_coin),
    )
    return (*out, head)


@njit(cache=True, nogil=True)
def _branch_loglik(plan, z, mc):
    rank = plan[PLAN_RANK]
    if rank < 2.0:
        n0 = plan[PLAN_N00] * z + plan[PLAN_N01] * mc
        n1 = plan[PLAN_N01] * z + plan[PLAN_N11] * mc
        tol = 1e-9 * (1.0 + max(abs(z), abs(mc)) + plan[PLAN_TOL_SCALE])
        if math.sqrt(n0 * n0 + n1 * n1) > tol:
            return False, -np.inf
    quad = plan[PLAN_P00] * z * z + 2.0 * plan[PLAN_P01] * z * mc + plan[PLAN_P11] * mc * mc
    return True, -0.5 * (quad + plan[PLAN_LOGPDET] + rank * LOG_2PI)


@njit(cache=True, nogil=True)
def _head_weight(z, mc, p, plan_h, plan_t):
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    ok_h, ll_h = _branch_loglik(plan_h, z, mc)
    ok_t, ll_t = _branch_loglik(plan_t, z, mc)
    if ok_h != ok_t:
        return 1.0 if ok_h else 0.0
    if not ok_h:
        return p
    if plan_h[PLAN_RANK] != plan_t[PLAN_RANK]:
        return 1.0 if plan_h[PLAN_RANK] < plan_t[PLAN_RANK] else 0.0
    if ll_h == ll_t:
        return p
    d = math.log(p) - math.log1p(-p) + (ll_h - ll_t)
    ed = math.exp(-abs(d))
    if d >= 0:
        return 1.0 / (1.0 + ed)
    return ed / (1.0 + ed)


@njit(cache=True, nogil=True)
def _estimate_one(z, mc, p, plan_h, plan_t):
    w = _head_weight(z, mc, p, plan_h, plan_t)
    xh = plan_h[PLAN_GX0] * z + plan_h[PLAN_GX1] * mc
    mh = plan_h[PLAN_GM0] * z + plan_h[PLAN_GM1] * mc
    if w == 1.0:
        return w, xh, mh
    xt = plan_t[PLAN_GX0] * z + plan_t[PLAN_GX1] * mc
    mt = plan_t[PLAN_GM0] * z + plan_t[PLAN_GM1] * mc
    if w == 0.0:
        return w, xt, mt
    return w, w * xh + (1.0 - w) * xt, w * mh + (1.0 - w) * mt


@njit(cache=True, nogil=True)
def _estimate(z, mc, p, plan_h, plan_t):
    n = z.shape[0]
    w = np.empty(n)
    xs = np.empty(n)
    ms = np.empty(n)
    for i in range(n):
        w[i], xs[i], ms[i] = _estimate_one(z[i], mc[i], p, plan_h, plan_t)
    return w, xs, ms


def estimate(z, mc, p, plan_h, plan_t):
    """Vectorized mixture adversary: ``(head_posterior, x_hat, mu_hat)``."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    mc = np.ascontiguousarray(mc, dtype=np.float64)
    return _estimate(z, mc, float(p), plan_h, plan_t)


@njit(cache=True, nogil=True)
def _kahan_mean_m2(v):
    n = v.shape[0]
    total = 0.0
    comp = 0.0
    for i in range(n):
        t = v[i] - comp
        s = total + t
        comp = (s - total) - t
        total = s
    mean = total / n
    total = 0.0
    comp = 0.0
    for i in range(n):
        d = v[i] - mean
        t = d * d - comp
        s = total + t
        comp = (s - total) - t
        total = s
    return mean, total


@njit(cache=True, nogil=True)
def _simulate_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin, plan_h, plan_t):
    eu = np.empty(count)
    ep = np.empty(count)
    em = np.empty(count)
    heads = 0
    post = 0.0
    for j in range(count):
        mu, s, w, e, x, y, mc, yr, h = _world(k0, k1, start + j, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin)
        z = yr if h else y
        wt, x_hat, mu_hat = _estimate_one(z, mc, p_coin, plan_h, plan_t)
        eu[j] = (z - x) ** 2
        ep[j] = (x_hat - x) ** 2
        em[j] = (mu_hat - mu) ** 2
        if h:
            heads += 1
        post += wt
    out = np.zeros(STAT_WIDTH)
    out[STAT_N] = count
    out[STAT_U_MEAN], out[STAT_U_M2] = _kahan_mean_m2(eu)
    out[STAT_P_MEAN], out[STAT_P_M2] = _kahan_mean_m2(ep)
    out[STAT_M_MEAN], out[STAT_M_M2] = _kahan_mean_m2(em)
    out[STAT_HEADS] = heads
    out[STAT_HEAD_POST] = post
    return out


def simulate_block(k0, k1, start, count, sd_mu, sd_s, sd_w, sd_e, a, b, p_coin, plan_h, plan_t):
    return _simulate_block(
        np.uint64(k0), np.uint64(k1), np.uint64(start), count,
        float(sd_mu), float(sd_s), float(sd_w), float(sd_e), float(a), float(b), float(p_coin),
        plan_h, plan_t,
    )


@njit(cache=True, nogil=True)
def _trace_draws(k0, k1, n_records, dim):
    normals = np.empty((n_records, dim))
    coin = np.empty(n_records)
    for r in range(n_records):
        lo = np.uint64(r) & MASK32
        hi = np.uint64(r) >> SHIFT32
        for c in range(dim):
            w0, w1, w2, w3 = _philox(lo, hi, _DOM_TRACE, np.uint64(c), k0, k1)
            normals[r, c] = _normal_pair(w0, w1, w2, w3)[0]
        w0, w1, w2, w3 = _philox(lo, hi, _DOM_COIN, np.uint64(0), k0, k1)
        coin[r] = _u53(w0, w1)
    return normals, coin


def trace_draws(k0, k1, n_records, dim):
    """Standard normals ``(n_records, dim)`` and per-record coin uniforms."""
    return _trace_draws(np.uint64(k0), np.uint64(k1), n_records, dim)
