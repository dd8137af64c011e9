"""Apply the release mechanisms to location trace files.

Trace CSV: header ``t,x1[,x2,...]``, one record per line, integer
timestamps strictly increasing. Multi-coordinate records use the scalar
model independently per coordinate; the randomized coin is tossed once per
record, so a record is released either fully remapped or fully obfuscated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .model import Mechanism, ModelParams, remap_weights, validate


class TraceError(ValueError):
    code = "trace_error"

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(TraceError):
    code = "malformed_header"


class NonMonotoneTimestamps(TraceError):
    code = "non_monotone_timestamps"


class RaggedRow(TraceError):
    code = "ragged_row"


class NonNumericField(TraceError):
    code = "non_numeric_field"


class InsufficientData(TraceError):
    code = "insufficient_data"


class DimensionMismatch(TraceError):
    code = "dimension_mismatch"


@dataclass(frozen=True, eq=False)
class Trace:
    t: tuple[int, ...]
    coords: np.ndarray  # shape (n, d)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64, ndmin=2)
        t = tuple(int(v) for v in self.t)
        if coords.shape[0] != len(t):
            if len(t) == 0 and coords.size == 0:
                coords = coords.reshape(0, max(coords.shape[-1], 1))
            else:
                raise ValueError("timestamps and coordinates differ in length")
        if coords.shape[1] < 1:
            raise ValueError("trace needs at least one coordinate")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("timestamps must be strictly increasing")
        coords.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def records(self) -> list[tuple[int, tuple[float, ...]]]:
        return [(t, tuple(float(v) for v in row)) for t, row in zip(self.t, self.coords)]

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.coords, other.coords)


def read_trace(text: str) -> Trace:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedHeader("empty input", line=1)
    header = lines[0].split(",")
    d = len(header) - 1
    if d < 1 or header[0] != "t" or header[1:] != [f"x{i}" for i in range(1, d + 1)]:
        raise MalformedHeader(f"expected 't,x1[,x2,...]', got {lines[0]!r}", line=1)

    times: list[int] = []
    coords = np.empty((len(lines) - 1, d))
    for n, line in enumerate(lines[1:]):
        lineno = n + 2
        fields = line.split(",")
        if len(fields) != d + 1:
            raise RaggedRow(f"expected {d + 1} fields, got {len(fields)}", line=lineno)
        try:
            t = int(fields[0])
        except ValueError:
            raise NonNumericField(f"timestamp {fields[0]!r} is not an integer", line=lineno) from None
        for c, field in enumerate(fields[1:]):
            try:
                value = float(field)
            except ValueError:
                raise NonNumericField(f"coordinate {field!r} is not a number", line=lineno) from None
            if not math.isfinite(value):
                raise NonNumericField(f"coordinate {field!r} is not finite", line=lineno)
            coords[n, c] = value
        if times and t <= times[-1]:
            raise NonMonotoneTimestamps(f"timestamp {t} does not exceed {times[-1]}", line=lineno)
        times.append(t)
    return Trace(tuple(times), coords.reshape(len(times), d))


def write_trace(trace: Trace) -> str:
    header = ",".join(["t"] + [f"x{i}" for i in range(1, trace.dim + 1)])
    rows = [",".join([str(t)] + [repr(float(v)) for v in row]) for t, row in zip(trace.t, trace.coords)]
    return "\n".join([header, *rows]) + "\n"


def fit_user_model(trace: Trace) -> tuple[np.ndarray, float]:
    """Per-coordinate sample mean and the pooled unbiased variance around it."""
    n = len(trace)
    if n < 2:
        raise InsufficientData(f"need at least 2 records to fit, got {n}")
    mu_hat = trace.coords.mean(axis=0)
    resid = trace.coords - mu_hat
    sigma2_s_hat = float(np.sum(resid * resid) / (trace.dim * (n - 1)))
    return mu_hat, sigma2_s_hat


def protect(
    trace: Trace,
    params: ModelParams,
    mechanism: Union[Mechanism, str],
    mu_source: Union[str, Sequence[float]] = "fit",
    seed: int = 0,
    backend: Optional[str] = None,
) -> Trace:
    """Obfuscate every coordinate with N(0, sigma2_w) noise and release per
    ``mechanism``.

    ``mu_source`` is ``"fit"`` (per-coordinate mean of this trace) or the
    user's mean, one value per coordinate. Noise for (record, coordinate)
    comes from a stream keyed by ``seed``, so the output is reproducible.
    """
    validate(params)
    mechanism = Mechanism(mechanism)
    if isinstance(mu_source, str):
        if mu_source != "fit":
            raise ValueError(f"mu_source must be 'fit' or a sequence of values, got {mu_source!r}")
        mu = fit_user_model(trace)[0]
    else:
        mu = np.asarray(mu_source, dtype=np.float64).reshape(-1)
        if mu.shape[0] != trace.dim:
            raise DimensionMismatch(f"trace has {trace.dim} coordinates but {mu.shape[0]} mean values were given")

    k0, k1 = kernels.split_seed(seed)
    normals, coin = kernels.get_backend(backend).trace_draws(k0, k1, len(trace), trace.dim)
    x = trace.coords
    y = x + math.sqrt(params.sigma2_w) * normals
    a, b = remap_weights(params.sigma2_s, params.sigma2_w)
    y_r = y + a * (mu - y) if a <= b else mu + b * (y - mu)

    if mechanism is Mechanism.NO_REMAP:
        z = y
    elif mechanism is Mechanism.REMAP:
        z = y_r
    else:
        z = np.where((coin < params.p_h)[:, None], y_r, y)
    return Trace(trace.t, z)
