"""Exact Bayes adversary estimators.

Everything reduces to conditioning a zero-mean joint Gaussian over
``(X, mu, Z, mu_check)``. Singular observation blocks (for instance a
noiseless prior, ``sigma2_e = 0``) are handled with a pseudo-inverse, which
is the exact-observation reduction: directions with zero variance are pinned
to their observed value and the rest is conditioned as usual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Adversary, Mechanism, ModelParams, remap_value, remap_weights, validate

X, MU, Z, MU_CHECK = range(4)
_LOG_2PI = math.log(2.0 * math.pi)


class SingularObservation(ValueError):
    """Observed values lie outside the support of a singular observation block."""

    code = "singular_observation"


@dataclass(frozen=True)
class GaussianJoint:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        k = mean.shape[0]
        if cov.shape != (k, k):
            raise ValueError(f"cov must be {k}x{k}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError("cov must be symmetric")
        if k and np.linalg.eigvalsh(cov).min() < -1e-10:
            raise ValueError("cov must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class AdversaryEstimate:
    x_hat: float
    mu_hat: float
    head_posterior: Optional[float] = None


@dataclass(frozen=True)
class _PsdInverse:
    pinv: np.ndarray
    logpdet: float
    rank: int
    null: np.ndarray  # projector onto the zero-variance directions


def _psd_inverse(cov: np.ndarray, rel_tol: float = 1e-12) -> _PsdInverse:
    vals, vecs = np.linalg.eigh(cov)
    top = vals.max(initial=0.0)
    keep = vals > rel_tol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    if keep.all() and keep.size:
        # full rank: a Cholesky inverse is far more accurate than the eigen
        # form when the Schur complement cancels heavily
        chol = np.linalg.cholesky(cov)
        chol_inv = np.linalg.inv(chol)
        return _PsdInverse(
            pinv=chol_inv.T @ chol_inv,
            logpdet=float(2.0 * np.sum(np.log(np.diag(chol)))),
            rank=cov.shape[0],
            null=np.zeros_like(cov),
        )
    kept = vecs[:, keep]
    dropped = vecs[:, ~keep]
    pinv = (kept / vals[keep]) @ kept.T
    return _PsdInverse(
        pinv=pinv,
        logpdet=float(np.sum(np.log(vals[keep]))),
        rank=int(keep.sum()),
        null=dropped @ dropped.T,
    )


def _consistent(inv: _PsdInverse, centered: np.ndarray, cov: np.ndarray) -> bool:
    if inv.rank == centered.shape[0]:
        return True
    scale = 1.0 + float(np.max(np.abs(centered), initial=0.0)) + math.sqrt(float(np.max(np.diag(cov), initial=0.0)))
    return float(np.linalg.norm(inv.null @ centered)) <= 1e-9 * scale


def _gain(c_oo: np.ndarray, c_ao: np.ndarray, inv: _PsdInverse) -> np.ndarray:
    # a direct solve keeps the Schur complement accurate when the block is
    # poorly conditioned; the pseudo-inverse is only needed for singular blocks
    if inv.rank == c_oo.shape[0]:
        return np.linalg.solve(c_oo, c_ao.T).T
    return c_ao @ inv.pinv


def gaussian_condition(
    joint: GaussianJoint,
    observed_indices: Sequence[int],
    observed_values: Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    """Condition ``joint`` on ``x[observed_indices] = observed_values``.

    Returns the conditional mean and covariance of the full vector; observed
    coordinates come back pinned to their values with zero variance.
    """
    idx = np.asarray(observed_indices, dtype=int).reshape(-1)
    values = np.asarray(observed_values, dtype=float).reshape(-1)
    if idx.shape != values.shape:
        raise ValueError("observed_indices and observed_values differ in length")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("observed indices must be distinct")
    k = joint.mean.shape[0]
    if idx.size == 0:
        return joint.mean.copy(), joint.cov.copy()

    c_oo = joint.cov[np.ix_(idx, idx)]
    c_ao = joint.cov[:, idx]
    inv = _psd_inverse(c_oo)
    centered = values - joint.mean[idx]
    if not _consistent(inv, centered, c_oo):
        raise SingularObservation("observed values are outside the support of a singular block")

    gain = _gain(c_oo, c_ao, inv)
    mean = joint.mean + gain @ centered
    cov = joint.cov - gain @ c_ao.T
    mean[idx] = values
    cov[idx, :] = 0.0
    cov[:, idx] = 0.0
    cov = 0.5 * (cov + cov.T)
    if k:
        np.fill_diagonal(cov, np.maximum(np.diag(cov), 0.0))
    return mean, cov


def observation_joint(params: ModelParams, released: Mechanism | str) -> GaussianJoint:
    """Joint law of ``(X, mu, Z, mu_check)`` when ``Z`` is the obfuscated
    value (``NoRemap``) or the remapped value (``Remap``)."""
    released = Mechanism(released)
    if released is Mechanism.RANDOMIZED:
        raise ValueError("randomized release is a mixture, not a single Gaussian")
    m, s, e, w = params.sigma2_mu, params.sigma2_s, params.sigma2_e, params.sigma2_w
    if released is Mechanism.NO_REMAP:
        var_z, cov_xz = m + s + w, m + s
    else:
        _, b = remap_weights(s, w)
        var_z = cov_xz = m + b * s
    cov = np.array(
        [
            [m + s, m, cov_xz, m],
            [m, m, m, m],
            [cov_xz, m, var_z, m],
            [m, m, m, m + e],
        ]
    )
    return GaussianJoint(np.zeros(4), cov)


def remap(y: float, mu: float, params: ModelParams) -> float:
    """Posterior mean of X given the obfuscated ``y`` and the true mean ``mu``."""
    validate(params)
    a, b = remap_weights(params.sigma2_s, params.sigma2_w)
    return remap_value(y, mu, a, b)


def adversary_perfect(y: float, mu: float, params: ModelParams) -> AdversaryEstimate:
    return AdversaryEstimate(x_hat=remap(y, mu, params), mu_hat=float(mu))


def adversary_imperfect(
    z: float, mu_check: float, params: ModelParams, released_kind: Mechanism | str
) -> AdversaryEstimate:
    validate(params)
    mean, _ = gaussian_condition(observation_joint(params, released_kind), [Z, MU_CHECK], [z, mu_check])
    return AdversaryEstimate(x_hat=float(mean[X]), mu_hat=float(mean[MU]))


def _branch_loglik(params: ModelParams, released: Mechanism, obs: np.ndarray) -> tuple[bool, int, float]:
    cov = observation_joint(params, released).cov[np.ix_([Z, MU_CHECK], [Z, MU_CHECK])]
    inv = _psd_inverse(cov)
    if not _consistent(inv, obs, cov):
        return False, inv.rank, -math.inf
    quad = float(obs @ inv.pinv @ obs)
    return True, inv.rank, -0.5 * (quad + inv.logpdet + inv.rank * _LOG_2PI)


def head_weight(p_h: float, head: tuple[bool, int, float], tail: tuple[bool, int, float]) -> float:
    """Posterior probability of the remapped branch from prior ``p_h`` and the
    per-branch ``(consistent, rank, loglik)`` triples.

    A branch whose support excludes the observation gets weight 0; when both
    contain it but one is lower-dimensional, its density dominates.
    """
    if p_h <= 0.0:
        return 0.0
    if p_h >= 1.0:
        return 1.0
    ok_h, rank_h, ll_h = head
    ok_t, rank_t, ll_t = tail
    if ok_h != ok_t:
        return 1.0 if ok_h else 0.0
    if not ok_h:
        return p_h
    if rank_h != rank_t:
        return 1.0 if rank_h < rank_t else 0.0
    if ll_h == ll_t:
        return p_h
    d = math.log(p_h) - math.log1p(-p_h) + ll_h - ll_t
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    ed = math.exp(d)
    return ed / (1.0 + ed)


def adversary_randomized(z: float, mu_check: float, params: ModelParams) -> AdversaryEstimate:
    """Bayes mixture adversary for randomized remapping.

    The coin outcome is hidden; the adversary knows ``p_h`` and weights the
    two per-branch posterior means by the branch posterior.
    """
    validate(params)
    obs = np.array([z, mu_check], dtype=float)
    w = head_weight(
        params.p_h,
        _branch_loglik(params, Mechanism.REMAP, obs),
        _branch_loglik(params, Mechanism.NO_REMAP, obs),
    )
    if w == 1.0:
        est = adversary_imperfect(z, mu_check, params, Mechanism.REMAP)
    elif w == 0.0:
        est = adversary_imperfect(z, mu_check, params, Mechanism.NO_REMAP)
    else:
        head = adversary_imperfect(z, mu_check, params, Mechanism.REMAP)
        tail = adversary_imperfect(z, mu_check, params, Mechanism.NO_REMAP)
        est = AdversaryEstimate(
            x_hat=w * head.x_hat + (1.0 - w) * tail.x_hat,
            mu_hat=w * head.mu_hat + (1.0 - w) * tail.mu_hat,
        )
    return AdversaryEstimate(est.x_hat, est.mu_hat, head_posterior=w)


def conditional_variances(params: ModelParams, released: Mechanism | str) -> tuple[float, float]:
    """Posterior variances of ``(X, mu)`` given ``(Z, mu_check)``. These do
    not depend on the observed values."""
    _, cov = gaussian_condition(observation_joint(params, released), [Z, MU_CHECK], [0.0, 0.0])
    return float(cov[X, X]), float(cov[MU, MU])


# Flat per-branch layout consumed by the compiled and numpy kernels.
PLAN_GX0, PLAN_GX1, PLAN_GM0, PLAN_GM1 = 0, 1, 2, 3
PLAN_P00, PLAN_P01, PLAN_P11 = 4, 5, 6
PLAN_LOGPDET, PLAN_RANK = 7, 8
PLAN_N00, PLAN_N01, PLAN_N11 = 9, 10, 11
PLAN_TOL_SCALE = 12
PLAN_WIDTH = 13


def branch_plan(params: ModelParams, released: Mechanism | str) -> np.ndarray:
    """Precompute gains, pseudo-precision and support projector of the
    ``(Z, mu_check)`` block for one branch."""
    joint = observation_joint(params, released)
    obs = [Z, MU_CHECK]
    cov = joint.cov[np.ix_(obs, obs)]
    inv = _psd_inverse(cov)
    gain = _gain(cov, joint.cov[:, obs], inv)
    plan = np.zeros(PLAN_WIDTH)
    plan[PLAN_GX0], plan[PLAN_GX1] = gain[X]
    plan[PLAN_GM0], plan[PLAN_GM1] = gain[MU]
    plan[PLAN_P00], plan[PLAN_P01], plan[PLAN_P11] = inv.pinv[0, 0], inv.pinv[0, 1], inv.pinv[1, 1]
    plan[PLAN_LOGPDET] = inv.logpdet
    plan[PLAN_RANK] = inv.rank
    plan[PLAN_N00], plan[PLAN_N01], plan[PLAN_N11] = inv.null[0, 0], inv.null[0, 1], inv.null[1, 1]
    plan[PLAN_TOL_SCALE] = math.sqrt(float(np.max(np.diag(cov))))
    return plan


def effective_params(params: ModelParams, adversary: Adversary | str) -> ModelParams:
    """A perfect-prior adversary is the ``sigma2_e = 0`` adversary."""
    if Adversary(adversary) is Adversary.PERFECT:
        return params.replace(sigma2_e=0.0)
    return params
