import dataclasses
import json
import math

import numpy as np
import pytest

from privremap.model import Adversary, Mechanism, ModelParams, NegativeVariance
from privremap.sim import BLOCK_SIZE, compare, derive_seed, run_monte_carlo, verify

N = 1_000_000


def close(metric, target, k=3.0):
    return abs(metric.empirical - target) <= k * metric.stderr


def test_no_remap_unit(unit, backend):
    r = run_monte_carlo(unit, Mechanism.NO_REMAP, N, seed=1, backend=backend)
    assert close(r.u, 1.0) and close(r.p_model, 0.4) and close(r.p_loc, 0.6)
    assert r.head_fraction == 0.0


def test_remap_unit(unit, backend):
    r = run_monte_carlo(unit, Mechanism.REMAP, N, seed=2, backend=backend)
    assert close(r.u, 0.5) and close(r.p_loc, 0.5) and close(r.p_model, 0.25)
    assert r.head_fraction == 1.0


@pytest.mark.parametrize("mech", list(Mechanism))
@pytest.mark.parametrize("adv", list(Adversary))
def test_noiseless_release_has_zero_utility_loss(mech, adv):
    r = run_monte_carlo(ModelParams(1.0, 2.0, 0.5, 0.0, 0.4), mech, 5000, seed=3, adversary=adv)
    assert r.u.empirical == 0.0


def test_perfect_adversary_matches_case_one(unit):
    for mech in (Mechanism.NO_REMAP, Mechanism.REMAP):
        result = verify(unit, mech, 200_000, seed=4, tolerance_sigmas=5, adversary=Adversary.PERFECT)
        assert result.passed
        assert result.metrics.p_model.empirical < 1e-20


def test_verify_passes_and_negative_control(unit):
    result = verify(unit, Mechanism.NO_REMAP, N, seed=5, tolerance_sigmas=5)
    assert result.passed
    assert [c.metric for c in result.comparisons] == ["u", "p_loc", "p_model"]
    report = result.metrics
    corrupted = dataclasses.replace(report, p_model=dataclasses.replace(report.p_model, analytic=0.44))
    bad = compare(corrupted, 5)
    assert not bad.passed
    assert [c.passed for c in bad.comparisons] == [True, True, False]


def test_verify_randomized_schema(unit):
    result = verify(unit, Mechanism.RANDOMIZED, 100_000, seed=6, tolerance_sigmas=5)
    rows = result.to_dict()["comparisons"]
    assert rows[0]["metric"] == "u" and rows[0]["status"] == "pass"
    assert [r["status"] for r in rows[1:]] == ["no closed form", "no closed form"]
    assert result.passed


def test_randomized_calibration(unit):
    r = run_monte_carlo(unit, Mechanism.RANDOMIZED, N, seed=7)
    assert abs(r.head_fraction - 0.5) <= 3 * math.sqrt(0.25 / N)
    # head posterior has variance at most 1/4; use that bound for the 3-sigma band
    assert abs(r.mean_head_posterior - 0.5) <= 3 * math.sqrt(0.25 / N)
    assert r.u.analytic == pytest.approx(0.75) and r.p_loc.analytic is None and r.p_model.analytic is None


def test_determinism_and_worker_independence(unit):
    n = 3 * BLOCK_SIZE + 17
    a = run_monte_carlo(unit, Mechanism.RANDOMIZED, n, seed=99, workers=1)
    b = run_monte_carlo(unit, Mechanism.RANDOMIZED, n, seed=99, workers=1)
    c = run_monte_carlo(unit, Mechanism.RANDOMIZED, n, seed=99, workers=4)
    assert a == b == c
    assert a.to_dict(timing=False) == c.to_dict(timing=False)
    assert run_monte_carlo(unit, Mechanism.RANDOMIZED, n, seed=100) != a


def test_threads_env_var(unit, monkeypatch):
    ref = run_monte_carlo(unit, Mechanism.REMAP, 2 * BLOCK_SIZE, seed=1, workers=1)
    monkeypatch.setenv("PRIV_REMAP_THREADS", "3")
    assert run_monte_carlo(unit, Mechanism.REMAP, 2 * BLOCK_SIZE, seed=1) == ref


def test_stderr_scaling(unit):
    ratios = []
    for seed in range(6):
        small = run_monte_carlo(unit, Mechanism.NO_REMAP, 50_000, seed=seed)
        big = run_monte_carlo(unit, Mechanism.NO_REMAP, 100_000, seed=seed + 1000)
        ratios.append(big.u.stderr / small.u.stderr)
    assert abs(np.mean(ratios) - 1 / math.sqrt(2)) <= 0.2 / math.sqrt(2)


def test_report_json_schema(unit):
    r = run_monte_carlo(unit, Mechanism.REMAP, 1000, seed=2**64 - 1)
    d = json.loads(json.dumps(r.to_dict()))
    assert set(d) == {
        "params", "mechanism", "adversary", "n_samples", "seed", "u", "p_loc", "p_model",
        "head_fraction", "mean_head_posterior", "runtime_ms",
    }
    assert d["params"] == {"sigma2_mu": 1.0, "sigma2_s": 1.0, "sigma2_e": 1.0, "sigma2_w": 1.0, "p_h": 0.5}
    assert d["seed"] == 2**64 - 1 and d["mechanism"] == "Remap"
    assert set(d["u"]) == {"analytic", "empirical", "stderr"}
    assert d["runtime_ms"] >= 0
    assert "runtime_ms" not in r.to_dict(timing=False)
    assert r.u.stderr > 0


def test_errors(unit):
    with pytest.raises(ValueError):
        run_monte_carlo(unit, Mechanism.REMAP, 1, seed=0)
    with pytest.raises(NegativeVariance):
        run_monte_carlo(unit.replace(sigma2_w=-1.0), Mechanism.REMAP, 10, seed=0)
    with pytest.raises(ValueError):
        run_monte_carlo(unit, Mechanism.REMAP, 10, seed=-3)


def test_derive_seed_spreads():
    seeds = {derive_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert derive_seed(42, 3) == derive_seed(42, 3) != derive_seed(43, 3)
