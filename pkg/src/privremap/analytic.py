"""Closed-form utility and privacy MSEs.

``u`` is the naive friend's MSE (the released value used as is), ``p_loc``
the adversary's MSE about the true location X and ``p_model`` the
adversary's MSE about the user mean mu. Zero-variance corners are resolved
by their algebraic limits instead of dividing by zero.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Optional

from .model import Adversary, Mechanism, ModelParams, validate


class CaseLabel(str, enum.Enum):
    PERFECT_NO_REMAP = "PerfectNoRemap"
    PERFECT_REMAP = "PerfectRemap"
    IMPERFECT_NO_REMAP = "ImperfectNoRemap"
    IMPERFECT_REMAP = "ImperfectRemap"
    RANDOMIZED_UTILITY_ONLY = "RandomizedUtilityOnly"


@dataclass(frozen=True)
class AnalyticReport:
    u: float
    p_loc: Optional[float]
    p_model: Optional[float]
    case_label: CaseLabel

    def to_dict(self) -> dict:
        out = asdict(self)
        out["case_label"] = self.case_label.value
        return out


def _ratio(num: float, den: float) -> float:
    # every formula here has num == 0 whenever den == 0
    return 0.0 if den == 0 else num / den


def _posterior_loc_given_mu(params: ModelParams) -> float:
    s, w = params.sigma2_s, params.sigma2_w
    return s * w / (s + w)


def utility_no_remap(params: ModelParams) -> float:
    validate(params)
    return float(params.sigma2_w)


def privacy_loc_perfect_no_remap(params: ModelParams) -> float:
    validate(params)
    return _posterior_loc_given_mu(params)


def utility_privacy_perfect_remap(params: ModelParams) -> tuple[float, float]:
    validate(params)
    value = _posterior_loc_given_mu(params)
    return value, value


def privacy_model_imperfect_no_remap(params: ModelParams) -> float:
    validate(params)
    m, e = params.sigma2_mu, params.sigma2_e
    t = params.sigma2_s + params.sigma2_w
    return _ratio(e * m * t, (m + e) * t + e * m)


def privacy_loc_imperfect_no_remap(params: ModelParams) -> float:
    validate(params)
    m, e, w = params.sigma2_mu, params.sigma2_e, params.sigma2_w
    t = params.sigma2_s + params.sigma2_w
    extra = _ratio(w * w * e * m, t * ((m + e) * t + e * m))
    return _posterior_loc_given_mu(params) + extra


def utility_imperfect_remap(params: ModelParams) -> float:
    validate(params)
    return _posterior_loc_given_mu(params)


def privacy_model_imperfect_remap(params: ModelParams) -> float:
    validate(params)
    m, e, s = params.sigma2_mu, params.sigma2_e, params.sigma2_s
    t = params.sigma2_s + params.sigma2_w
    return _ratio(s * s * e * m, s * s * (m + e) + e * m * t)


def privacy_loc_imperfect_remap(params: ModelParams) -> float:
    validate(params)
    return _posterior_loc_given_mu(params)


def utility_randomized(params: ModelParams) -> float:
    """Friend MSE under randomized remapping.

    Head releases the remapped value (MSE ``s*w/(s+w)``), tail releases the
    obfuscated value (MSE ``w``).
    """
    validate(params)
    p = params.p_h
    return p * _posterior_loc_given_mu(params) + (1.0 - p) * params.sigma2_w


def equivalent_prior_error_from_history(n_observations: int, params: ModelParams) -> float:
    """Posterior variance of mu after ``n_observations`` independent
    obfuscated releases, usable as ``sigma2_e`` for a history-trained
    adversary. Returns 0 when ``sigma2_mu`` is 0."""
    validate(params)
    if int(n_observations) != n_observations or n_observations < 1:
        raise ValueError(f"n_observations must be a positive integer, got {n_observations!r}")
    if params.sigma2_mu == 0:
        return 0.0
    return 1.0 / (1.0 / params.sigma2_mu + n_observations / (params.sigma2_s + params.sigma2_w))


def analytic_report(
    params: ModelParams,
    mechanism: Mechanism | str,
    adversary: Adversary | str = Adversary.IMPERFECT,
) -> AnalyticReport:
    """Closed-form (u, p_loc, p_model) for one mechanism/adversary pair.

    A perfect-prior adversary knows mu, so its ``p_model`` is 0 and
    ``sigma2_e`` is ignored. Randomized remapping has a closed form for
    ``u`` only.
    """
    mechanism = Mechanism(mechanism)
    adversary = Adversary(adversary)
    validate(params)
    if mechanism is Mechanism.RANDOMIZED:
        return AnalyticReport(utility_randomized(params), None, None, CaseLabel.RANDOMIZED_UTILITY_ONLY)
    if adversary is Adversary.PERFECT:
        if mechanism is Mechanism.NO_REMAP:
            return AnalyticReport(
                utility_no_remap(params),
                privacy_loc_perfect_no_remap(params),
                0.0,
                CaseLabel.PERFECT_NO_REMAP,
            )
        u, p_loc = utility_privacy_perfect_remap(params)
        return AnalyticReport(u, p_loc, 0.0, CaseLabel.PERFECT_REMAP)
    if mechanism is Mechanism.NO_REMAP:
        return AnalyticReport(
            utility_no_remap(params),
            privacy_loc_imperfect_no_remap(params),
            privacy_model_imperfect_no_remap(params),
            CaseLabel.IMPERFECT_NO_REMAP,
        )
    return AnalyticReport(
        utility_imperfect_remap(params),
        privacy_loc_imperfect_remap(params),
        privacy_model_imperfect_remap(params),
        CaseLabel.IMPERFECT_REMAP,
    )
