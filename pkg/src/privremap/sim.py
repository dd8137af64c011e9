"""Seeded Monte-Carlo engine for empirical (U, P, P-model) with standard errors.

Samples are split into fixed blocks of ``BLOCK_SIZE`` indices. Each block's
randomness depends only on ``(seed, sample index)`` and block statistics are
merged in index order, so a report is bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analytic, kernels
from .estimators import branch_plan, effective_params
from .kernels import _layout as L
from .model import Adversary, Mechanism, ModelParams, remap_weights, validate

BLOCK_SIZE = 1 << 16
DEFAULT_SAMPLES = 1_000_000
# absolute slack for metrics whose exact value is 0 and whose samples are pure rounding
ROUNDING_FLOOR = 1e-12

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, index: int) -> int:
    """SplitMix64 finalizer over ``(seed, index)``; used for per-cell seeds."""
    z = (int(seed) + 0x9E3779B97F4A7C15 * (int(index) + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = int(os.environ.get("PRIV_REMAP_THREADS", "0") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


@dataclass(frozen=True)
class MetricEstimate:
    analytic: Optional[float]
    empirical: float
    stderr: float

    def to_dict(self) -> dict:
        return {"analytic": self.analytic, "empirical": self.empirical, "stderr": self.stderr}


@dataclass(frozen=True)
class MetricsReport:
    params: ModelParams
    mechanism: Mechanism
    adversary: Adversary
    n_samples: int
    seed: int
    u: MetricEstimate
    p_loc: MetricEstimate
    p_model: MetricEstimate
    head_fraction: float
    mean_head_posterior: float
    runtime_ms: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "params": self.params.to_dict(),
            "mechanism": self.mechanism.value,
            "adversary": self.adversary.value,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "u": self.u.to_dict(),
            "p_loc": self.p_loc.to_dict(),
            "p_model": self.p_model.to_dict(),
            "head_fraction": self.head_fraction,
            "mean_head_posterior": self.mean_head_posterior,
        }
        if timing:
            out["runtime_ms"] = self.runtime_ms
        return out


def _merge(stats: list[np.ndarray]) -> np.ndarray:
    """Chan et al. pairwise-update merge of per-block (n, mean, M2) triples,
    applied left to right in block order."""
    total = stats[0].copy()
    for block in stats[1:]:
        n_a, n_b = total[L.STAT_N], block[L.STAT_N]
        n = n_a + n_b
        for mean_i, m2_i in (
            (L.STAT_U_MEAN, L.STAT_U_M2),
            (L.STAT_P_MEAN, L.STAT_P_M2),
            (L.STAT_M_MEAN, L.STAT_M_M2),
        ):
            delta = block[mean_i] - total[mean_i]
            total[mean_i] = total[mean_i] + delta * (n_b / n)
            total[m2_i] = total[m2_i] + block[m2_i] + delta * delta * (n_a * n_b / n)
        total[L.STAT_N] = n
        total[L.STAT_HEADS] += block[L.STAT_HEADS]
        total[L.STAT_HEAD_POST] += block[L.STAT_HEAD_POST]
    return total


def _estimate(mean: float, m2: float, n: int, exact: Optional[float]) -> MetricEstimate:
    stderr = math.sqrt(max(m2, 0.0) / (n - 1)) / math.sqrt(n)
    return MetricEstimate(analytic=exact, empirical=float(mean), stderr=stderr)


def run_monte_carlo(
    params: ModelParams,
    mechanism: Mechanism | str,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    adversary: Adversary | str = Adversary.IMPERFECT,
    workers: Optional[int] = None,
    backend: Optional[str] = None,
) -> MetricsReport:
    """Simulate ``n_samples`` worlds, release per ``mechanism``, attack with
    the matching Bayes adversary and average the squared errors.

    The friend's estimate is the released value itself. A perfect adversary
    sees ``mu_check = mu`` (``sigma2_e`` ignored).
    """
    t0 = time.perf_counter()
    validate(params)
    mechanism = Mechanism(mechanism)
    adversary = Adversary(adversary)
    if int(n_samples) != n_samples or n_samples < 2:
        raise ValueError(f"n_samples must be an integer >= 2, got {n_samples!r}")
    n_samples = int(n_samples)
    k0, k1 = kernels.split_seed(seed)
    kern = kernels.get_backend(backend)

    eff = effective_params(params, adversary)
    plan_h = branch_plan(eff, Mechanism.REMAP)
    plan_t = branch_plan(eff, Mechanism.NO_REMAP)
    a, b = remap_weights(params.sigma2_s, params.sigma2_w)
    p_coin = {Mechanism.NO_REMAP: 0.0, Mechanism.REMAP: 1.0, Mechanism.RANDOMIZED: params.p_h}[mechanism]
    sds = [math.sqrt(v) for v in (eff.sigma2_mu, eff.sigma2_s, eff.sigma2_w, eff.sigma2_e)]

    starts = range(0, n_samples, BLOCK_SIZE)

    def run_block(start: int) -> np.ndarray:
        count = min(BLOCK_SIZE, n_samples - start)
        return kern.simulate_block(k0, k1, start, count, *sds, a, b, p_coin, plan_h, plan_t)

    n_workers = min(worker_count(workers), len(starts))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            stats = list(pool.map(run_block, starts))
    else:
        stats = [run_block(s) for s in starts]
    total = _merge(stats)

    exact = analytic.analytic_report(params, mechanism, adversary)
    report = MetricsReport(
        params=params,
        mechanism=mechanism,
        adversary=adversary,
        n_samples=n_samples,
        seed=int(seed),
        u=_estimate(total[L.STAT_U_MEAN], total[L.STAT_U_M2], n_samples, exact.u),
        p_loc=_estimate(total[L.STAT_P_MEAN], total[L.STAT_P_M2], n_samples, exact.p_loc),
        p_model=_estimate(total[L.STAT_M_MEAN], total[L.STAT_M_M2], n_samples, exact.p_model),
        head_fraction=float(total[L.STAT_HEADS] / n_samples),
        mean_head_posterior=float(total[L.STAT_HEAD_POST] / n_samples),
        runtime_ms=(time.perf_counter() - t0) * 1e3,
    )
    return report


@dataclass(frozen=True)
class Comparison:
    metric: str
    analytic: Optional[float]
    empirical: float
    stderr: float
    z_score: Optional[float]
    passed: Optional[bool]

    def to_dict(self) -> dict:
        out = {
            "metric": self.metric,
            "analytic": self.analytic,
            "empirical": self.empirical,
            "stderr": self.stderr,
        }
        if self.analytic is None:
            out["status"] = "no closed form"
        else:
            out["z_score"] = self.z_score
            out["status"] = "pass" if self.passed else "fail"
        return out


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    tolerance_sigmas: float
    comparisons: list[Comparison]
    metrics: MetricsReport

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "passed": self.passed,
            "tolerance_sigmas": self.tolerance_sigmas,
            "comparisons": [c.to_dict() for c in self.comparisons],
            "metrics": self.metrics.to_dict(timing=timing),
        }


def compare(report: MetricsReport, tolerance_sigmas: float) -> VerifyReport:
    """Check each empirical metric against its closed form, if any:
    ``|empirical - analytic| <= k * stderr`` plus a rounding floor."""
    if not tolerance_sigmas > 0:
        raise ValueError("tolerance_sigmas must be positive")
    rows = []
    for name in ("u", "p_loc", "p_model"):
        m: MetricEstimate = getattr(report, name)
        if m.analytic is None:
            rows.append(Comparison(name, None, m.empirical, m.stderr, None, None))
            continue
        diff = abs(m.empirical - m.analytic)
        z = diff / m.stderr if m.stderr > 0 else (0.0 if diff == 0 else math.inf)
        ok = diff <= tolerance_sigmas * m.stderr + ROUNDING_FLOOR * (1.0 + abs(m.analytic))
        rows.append(Comparison(name, m.analytic, m.empirical, m.stderr, z, ok))
    passed = all(r.passed for r in rows if r.passed is not None)
    return VerifyReport(passed, float(tolerance_sigmas), rows, report)


def verify(
    params: ModelParams,
    mechanism: Mechanism | str,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tolerance_sigmas: float = 5.0,
    adversary: Adversary | str = Adversary.IMPERFECT,
    workers: Optional[int] = None,
    backend: Optional[str] = None,
) -> VerifyReport:
    report = run_monte_carlo(params, mechanism, n_samples, seed, adversary, workers, backend)
    return compare(report, tolerance_sigmas)
