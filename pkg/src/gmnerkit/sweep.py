"""Monte-Carlo characterization of the box perturbation.

For each config in a grid, perturbs n sampled boxes and reports the mean IoU
to the original, the per-try guard acceptance rate, the fallback rate, and
the fraction of outputs still at IoU >= 0.5 with the original.  Sampling is
paired: every grid cell perturbs the same boxes with the same per-sample
seeds, which removes between-cell sampling noise from grid comparisons.

Synthetic boxes have integer pixel coordinates, like real annotations, so a
zero-jitter cell reproduces its inputs exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError
from .geometry import Box, ImageDims, iou
from .grbp import GrbpConfig, perturb
from .rng import RandomStream, derive_seed


@dataclass(frozen=True)
class BoxSamplerSpec:
    """Synthetic box distribution: integer boxes inside a width x height image.

    Widths and heights are uniform on [min_size, max_frac * side], positions
    uniform over placements that keep the box inside the image.
    """

    width: int = 640
    height: int = 480
    min_size: float = 8.0
    max_frac: float = 0.5

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"sampler image size must be positive, got {self.width}x{self.height}")
        if not 0.0 < self.max_frac <= 1.0:
            raise ConfigError(f"sampler max_frac must lie in (0, 1], got {self.max_frac}")
        if self.min_size < 1:
            raise ConfigError(f"sampler min_size must be >= 1, got {self.min_size}")
        if self.min_size > self.max_frac * min(self.width, self.height):
            raise ConfigError(
                f"sampler min_size {self.min_size} exceeds max box side "
                f"{self.max_frac * min(self.width, self.height):g}"
            )

    @property
    def dims(self) -> ImageDims:
        return ImageDims(self.width, self.height)


def sample_box(spec: BoxSamplerSpec, stream: RandomStream) -> Box:
    """Draw one integer-coordinate box; consumes exactly 4 uniforms."""
    w_hi = spec.max_frac * spec.width
    h_hi = spec.max_frac * spec.height
    w = int(math.floor(spec.min_size + stream.uniform() * (w_hi - spec.min_size)))
    h = int(math.floor(spec.min_size + stream.uniform() * (h_hi - spec.min_size)))
    w = max(1, min(w, spec.width))
    h = max(1, min(h, spec.height))
    x1 = min(spec.width - w, int(math.floor(stream.uniform() * (spec.width - w + 1))))
    y1 = min(spec.height - h, int(math.floor(stream.uniform() * (spec.height - h + 1))))
    return Box(float(x1), float(y1), float(x1 + w), float(y1 + h))


@dataclass(frozen=True)
class SweepRow:
    beta: float
    gamma: float
    tau: float
    mean_iou: float
    acceptance_rate: float
    fallback_rate: float
    acc_at_half: float

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "gamma": self.gamma,
            "tau": self.tau,
            "mean_iou": self.mean_iou,
            "acceptance_rate": self.acceptance_rate,
            "fallback_rate": self.fallback_rate,
            "acc_at_0.5": self.acc_at_half,
        }


def characterize(
    configs: Sequence[GrbpConfig],
    n_samples: int,
    seed: int,
    sampler: BoxSamplerSpec | None = None,
    boxes: Sequence[tuple[Box, ImageDims]] | None = None,
) -> list[SweepRow]:
    """Monte-Carlo estimates per config; deterministic given the seed.

    Boxes come either from the synthetic sampler (default) or from an
    explicit (box, dims) sequence, cycled to n_samples.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if boxes is not None and len(boxes) == 0:
        raise ConfigError("explicit box pool is empty")
    if sampler is None:
        sampler = BoxSamplerSpec()

    pool: list[tuple[Box, ImageDims]] = []
    if boxes is not None:
        pool = [boxes[j % len(boxes)] for j in range(n_samples)]
    else:
        dims = sampler.dims
        for j in range(n_samples):
            stream = RandomStream(derive_seed(seed, "box", j))
            pool.append((sample_box(sampler, stream), dims))
    perturb_seeds = [derive_seed(seed, "perturb", j) for j in range(n_samples)]

    rows: list[SweepRow] = []
    for cfg in configs:
        iou_sum = 0.0
        n_fallback = 0
        n_accepted = 0
        tries_total = 0
        n_acc_half = 0
        for j, (box, dims) in enumerate(pool):
            out = perturb(box, dims, cfg, perturb_seeds[j])
            v = iou(out.box, box)
            iou_sum += v
            tries_total += out.tries_used
            if out.was_fallback:
                n_fallback += 1
            else:
                n_accepted += 1
            if v >= 0.5:
                n_acc_half += 1
        rows.append(
            SweepRow(
                beta=cfg.beta,
                gamma=cfg.gamma,
                tau=cfg.tau,
                mean_iou=iou_sum / n_samples,
                acceptance_rate=n_accepted / tries_total if tries_total else 0.0,
                fallback_rate=n_fallback / n_samples,
                acc_at_half=n_acc_half / n_samples,
            )
        )
    return rows


SWEEP_CSV_COLUMNS = ("beta", "gamma", "tau", "mean_iou", "acceptance_rate", "fallback_rate", "acc_at_0.5")


def write_sweep_csv(rows: Sequence[SweepRow], path: str) -> None:
    """Plot-ready CSV, one row per grid cell, six-decimal fixed formatting."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            d = row.to_dict()
            writer.writerow([f"{d[col]:.6f}" if isinstance(d[col], float) else d[col] for col in SWEEP_CSV_COLUMNS])
