"""Parameter-grid experiments over (p_h, sigma2_w) and their tabular output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .model import Adversary, Mechanism, ModelParams, validate
from .sim import MetricsReport, derive_seed, run_monte_carlo

CSV_COLUMNS = (
    "mechanism", "p_h", "sigma2_mu", "sigma2_s", "sigma2_e", "sigma2_w", "n_samples", "seed",
    "u_analytic", "u_empirical", "u_stderr",
    "p_loc_analytic", "p_loc_empirical", "p_loc_stderr",
    "p_model_analytic", "p_model_empirical", "p_model_stderr",
)
_INT_COLUMNS = {"n_samples", "seed"}

DEFAULT_SIGMA2_W = tuple(round(0.1 * i, 12) for i in range(11))
DEFAULT_P_H = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class SweepSpec:
    base_params: ModelParams
    sigma2_w_grid: Sequence[float]
    p_h_list: Sequence[float]
    n_samples: int
    seed: int
    adversary: Adversary = Adversary.IMPERFECT

    def __post_init__(self):
        grid = tuple(float(v) for v in self.sigma2_w_grid)
        p_list = tuple(float(v) for v in self.p_h_list)
        if not grid or not p_list:
            raise ValueError("sweep grids must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sigma2_w grid must be strictly increasing")
        object.__setattr__(self, "sigma2_w_grid", grid)
        object.__setattr__(self, "p_h_list", p_list)
        object.__setattr__(self, "adversary", Adversary(self.adversary))
        for cell in self.cells():
            validate(cell[1])

    def cells(self) -> list[tuple[int, ModelParams, Mechanism]]:
        """Cells ordered by (p_h, sigma2_w) with their flat index."""
        out = []
        for i, p in enumerate(self.p_h_list):
            for j, w in enumerate(self.sigma2_w_grid):
                params = self.base_params.replace(sigma2_w=w, p_h=p)
                out.append((i * len(self.sigma2_w_grid) + j, params, mechanism_for(p)))
        return out


def mechanism_for(p_h: float) -> Mechanism:
    if p_h == 0.0:
        return Mechanism.NO_REMAP
    if p_h == 1.0:
        return Mechanism.REMAP
    return Mechanism.RANDOMIZED


def default_sweep_spec(n_samples: int = 100_000, seed: int = 20190707) -> SweepSpec:
    """Unit variances, sigma2_w in 0, 0.1, ..., 1 and p_h in {0, .2, .4, .6, .8, 1}."""
    return SweepSpec(ModelParams(1.0, 1.0, 1.0, 0.0, 0.0), DEFAULT_SIGMA2_W, DEFAULT_P_H, n_samples, seed)


def parse_grid(text: str) -> list[float]:
    """Parse ``start:stop:step``; ``stop`` is included when it lies on the
    grid to within 1e-9 steps."""
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop) and math.isfinite(step)) or step <= 0 or stop < start:
        raise ValueError(f"invalid grid {text!r}")
    n = (stop - start) / step
    k = round(n)
    count = k + 1 if abs(n - k) <= 1e-9 else math.floor(n) + 1
    return [float(f"{start + i * step:.12g}") for i in range(count)]


def run_sweep(
    spec: SweepSpec, workers: Optional[int] = None, backend: Optional[str] = None
) -> list[MetricsReport]:
    """One Monte-Carlo report per (p_h, sigma2_w) cell. Cell seeds are
    derived from ``(spec.seed, cell index)``."""
    return [
        run_monte_carlo(
            params, mechanism, spec.n_samples, derive_seed(spec.seed, index),
            spec.adversary, workers=workers, backend=backend,
        )
        for index, params, mechanism in spec.cells()
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def report_row(report: MetricsReport) -> list[str]:
    p = report.params
    row = [report.mechanism.value, p.p_h, p.sigma2_mu, p.sigma2_s, p.sigma2_e, p.sigma2_w,
           report.n_samples, report.seed]
    for name in ("u", "p_loc", "p_model"):
        m = getattr(report, name)
        row += [m.analytic, m.empirical, m.stderr]
    return [cell if isinstance(cell, str) else _fmt(cell) for cell in row]


def emit_csv(reports: Iterable[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        writer.writerow(report_row(report))
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Inverse of :func:`emit_csv`: numbers come back as int/float, empty
    analytic cells as None."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError("unexpected sweep CSV header")
    rows = []
    for raw in reader:
        row = {}
        for key, value in raw.items():
            if key == "mechanism":
                row[key] = value
            elif value == "":
                row[key] = None
            elif key in _INT_COLUMNS:
                row[key] = int(value)
            else:
                row[key] = float(value)
        rows.append(row)
    return rows


def emit_jsonl(reports: Iterable[MetricsReport], timing: bool = False) -> str:
    return "".join(json.dumps(r.to_dict(timing=timing)) + "\n" for r in reports)
