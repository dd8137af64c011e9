"""Domain types, parameter validation and generative sampling of one world.

A world is one realization of the scalar Gaussian location model::

    mu ~ N(0, sigma2_mu)        user mean
    X = mu + S, S ~ N(0, sigma2_s)
    Y = X + W,  W ~ N(0, sigma2_w)   obfuscated release
    mu_check = mu + E, E ~ N(0, sigma2_e)   adversary's noisy prior
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ParameterError(ValueError):
    """Base class for invalid model parameters."""

    code = "invalid_parameter"


class NegativeVariance(ParameterError):
    code = "negative_variance"


class NonFiniteParameter(ParameterError):
    code = "non_finite_parameter"


class ProbabilityOutOfRange(ParameterError):
    code = "probability_out_of_range"


class DegenerateModel(ParameterError):
    code = "degenerate_model"


class Mechanism(str, enum.Enum):
    """Release mechanism applied to each obfuscated location."""

    NO_REMAP = "NoRemap"
    REMAP = "Remap"
    RANDOMIZED = "Randomized"


class Adversary(str, enum.Enum):
    """Prior knowledge held by the adversary.

    ``PERFECT`` knows mu exactly (the sigma2_e = 0 corner); ``IMPERFECT``
    holds ``mu_check = mu + E``.
    """

    PERFECT = "perfect"
    IMPERFECT = "imperfect"


class Branch(str, enum.Enum):
    HEAD = "Head"
    TAIL = "Tail"


_VARIANCE_FIELDS = ("sigma2_mu", "sigma2_s", "sigma2_e", "sigma2_w")


@dataclass(frozen=True)
class ModelParams:
    """The five scalars every formula in the package depends on."""

    sigma2_mu: float
    sigma2_s: float
    sigma2_e: float
    sigma2_w: float
    p_h: float = 0.5

    def replace(self, **changes) -> "ModelParams":
        fields = {name: getattr(self, name) for name in (*_VARIANCE_FIELDS, "p_h")}
        fields.update(changes)
        return ModelParams(**fields)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in (*_VARIANCE_FIELDS, "p_h")}


@dataclass(frozen=True)
class WorldSample:
    mu: float
    s: float
    w: float
    e: float
    x: float
    y: float
    mu_check: float
    y_r: float


@dataclass(frozen=True)
class MechanismOutput:
    """Released value ``z``. ``branch`` is diagnostic only and never reaches
    an adversary."""

    z: float
    branch: Optional[Branch] = None


def validate(params: ModelParams) -> ModelParams:
    """Check the parameter invariants and return ``params`` unchanged.

    Raises
    ------
    NonFiniteParameter, NegativeVariance, ProbabilityOutOfRange, DegenerateModel
    """
    for name in (*_VARIANCE_FIELDS, "p_h"):
        value = getattr(params, name)
        if not math.isfinite(value):
            raise NonFiniteParameter(f"{name} must be finite, got {value!r}")
    for name in _VARIANCE_FIELDS:
        value = getattr(params, name)
        if value < 0:
            raise NegativeVariance(f"{name} must be >= 0, got {value!r}")
    if not 0.0 <= params.p_h <= 1.0:
        raise ProbabilityOutOfRange(f"p_h must lie in [0, 1], got {params.p_h!r}")
    if params.sigma2_s + params.sigma2_w <= 0:
        raise DegenerateModel("sigma2_s + sigma2_w must be > 0")
    return params


def remap_weights(sigma2_s: float, sigma2_w: float) -> tuple[float, float]:
    """Return ``(a, b)`` with ``a = sigma2_w / (sigma2_s + sigma2_w)`` (weight on
    the mean) and ``b = sigma2_s / (sigma2_s + sigma2_w)`` (weight on y).

    The degenerate ``0 + 0`` model maps to ``(0, 1)``, releasing y.
    """
    total = sigma2_s + sigma2_w
    if total == 0:
        return 0.0, 1.0
    return sigma2_w / total, sigma2_s / total


def remap_value(y, mu, a: float, b: float):
    """Convex combination ``a*mu + b*y`` evaluated from the nearer endpoint.

    Stepping from the endpoint with the larger weight keeps both limits exact:
    ``a == 0`` returns ``y`` and ``b == 0`` returns ``mu`` bit for bit.
    Works on scalars and arrays.
    """
    if a <= b:
        return y + a * (mu - y)
    return mu + b * (y - mu)


def _world_from_draws(params: ModelParams, mu, s, w, e) -> WorldSample:
    a, b = remap_weights(params.sigma2_s, params.sigma2_w)
    x = mu + s
    y = x + w
    return WorldSample(
        mu=mu, s=s, w=w, e=e, x=x, y=y, mu_check=mu + e, y_r=remap_value(y, mu, a, b)
    )


def sample_world(params: ModelParams, rng: np.random.Generator) -> WorldSample:
    """Draw one world realization.

    ``params`` is not re-validated here, so degenerate all-zero models can be
    sampled for testing.
    """
    sd = [math.sqrt(getattr(params, name)) for name in ("sigma2_mu", "sigma2_s", "sigma2_w", "sigma2_e")]
    mu, s, w, e = (float(v) for v in rng.standard_normal(4) * np.asarray(sd))
    return _world_from_draws(params, mu, s, w, e)


def apply_mechanism(
    world: WorldSample,
    mechanism: Mechanism,
    params: ModelParams,
    rng: Optional[np.random.Generator] = None,
) -> MechanismOutput:
    """Release a value for ``world``.

    The randomized coin is tossed with ``rng`` (independently per call); it
    is compared as ``u < p_h`` so ``p_h = 0`` never and ``p_h = 1`` always
    remaps.
    """
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.NO_REMAP:
        return MechanismOutput(z=world.y)
    if mechanism is Mechanism.REMAP:
        return MechanismOutput(z=world.y_r)
    if rng is None:
        raise ValueError("randomized mechanism needs a random generator")
    head = rng.random() < params.p_h
    if head:
        return MechanismOutput(z=world.y_r, branch=Branch.HEAD)
    return MechanismOutput(z=world.y, branch=Branch.TAIL)
