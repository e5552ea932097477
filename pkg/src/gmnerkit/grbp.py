"""IoU-guarded Gaussian box perturbation (GRBP).

Replaces a hard box target with a jittered one: the center is shifted by
Gaussian noise proportional to the box size (std beta), width and height are
scaled by bounded multiplicative Gaussian noise (std gamma), candidates are
clipped to the image, and a candidate is accepted only when its IoU with the
original box stays at or above tau.  After max_tries rejections the original
box is returned unchanged.

Every try consumes exactly 4 normal draws in the fixed order
(dx, dy, ew, eh); boxes already smaller than min_size return early without
consuming any randomness.  All draws come from the portable stream in
``rng``, so results are identical across platforms and worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ConfigError, DegenerateClipError, InputError, ToolkitError
from .geometry import Box, CenterSize, ImageDims, box_within, clip_to_image, iou, to_box, to_center_size
from .records import Example, EntityRecord
from .rng import RandomStream, derive_seed


@dataclass(frozen=True)
class GrbpConfig:
    """All perturbation knobs.

    beta / gamma are the center and scale jitter standard deviations, tau the
    IoU acceptance threshold, max_tries the resample budget, min_size the
    smallest width/height (pixels) ever produced or perturbed, and
    [s_min, s_max] the bounds on the multiplicative scale factor.
    """

    beta: float = 0.03
    gamma: float = 0.03
    tau: float = 0.7
    max_tries: int = 10
    min_size: float = 4.0
    s_min: float = 0.8
    s_max: float = 1.2

    def __post_init__(self) -> None:
        for name in ("beta", "gamma", "tau", "min_size", "s_min", "s_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ConfigError(f"grbp.{name} must be a finite number, got {v!r}")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigError(f"jitter std-devs must be >= 0, got beta={self.beta}, gamma={self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"grbp.tau must lie in [0, 1], got {self.tau}")
        if not isinstance(self.max_tries, int) or isinstance(self.max_tries, bool) or self.max_tries < 1:
            raise ConfigError(f"grbp.max_tries must be a positive integer, got {self.max_tries!r}")
        if self.min_size <= 0:
            raise ConfigError(f"grbp.min_size must be > 0, got {self.min_size}")
        if not 0.0 < self.s_min <= self.s_max:
            raise ConfigError(
                f"scale bounds must satisfy 0 < s_min <= s_max, got [{self.s_min}, {self.s_max}]"
            )


@dataclass(frozen=True)
class PerturbOutcome:
    """Result of one perturbation: the box, whether it fell back, tries consumed."""

    box: Box
    was_fallback: bool
    tries_used: int


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, v))


def perturb(b: Box, dims: ImageDims, cfg: GrbpConfig, seed: int) -> PerturbOutcome:
    """Jitter one box under the IoU guard; deterministic for a fixed seed."""
    if not box_within(b, dims):
        raise InputError(
            f"box ({b.x1}, {b.y1}, {b.x2}, {b.y2}) must lie inside the "
            f"{dims.width}x{dims.height} image before perturbation"
        )
    cs = to_center_size(b)
    if cs.w < cfg.min_size or cs.h < cfg.min_size:
        return PerturbOutcome(box=b, was_fallback=True, tries_used=0)

    stream = RandomStream(seed)
    for t in range(1, cfg.max_tries + 1):
        dx = stream.normal() * cfg.beta
        dy = stream.normal() * cfg.beta
        ew = stream.normal() * cfg.gamma
        eh = stream.normal() * cfg.gamma

        c_x = cs.c_x + dx * cs.w
        c_y = cs.c_y + dy * cs.h
        a_w = _clamp(1.0 + ew, cfg.s_min, cfg.s_max)
        a_h = _clamp(1.0 + eh, cfg.s_min, cfg.s_max)
        w = max(cfg.min_size, cs.w * a_w)
        h = max(cfg.min_size, cs.h * a_h)

        candidate = to_box(CenterSize(c_x, c_y, w, h))
        try:
            candidate = clip_to_image(candidate, dims)
        except DegenerateClipError:
            continue  # jittered fully out of the image: counts as a failed try
        if iou(candidate, b) >= cfg.tau:
            return PerturbOutcome(box=candidate, was_fallback=False, tries_used=t)
    return PerturbOutcome(box=b, was_fallback=True, tries_used=cfg.max_tries)


def perturb_example(
    ex: Example, cfg: GrbpConfig, base_seed: int
) -> tuple[Example, list[PerturbOutcome]]:
    """Perturb every boxed gold record of one example.

    Record seeds derive from (base_seed, example id, record index), so the
    result is independent of dataset order and worker layout.  Per-box errors
    are re-raised with the example id attached.
    """
    new_gold: list[EntityRecord] = []
    outcomes: list[PerturbOutcome] = []
    for idx, rec in enumerate(ex.gold):
        if rec.box is None:
            new_gold.append(rec)
            continue
        try:
            out = perturb(rec.box, ex.dims, cfg, derive_seed(base_seed, ex.id, idx))
        except ToolkitError as e:
            raise type(e)(f"example {ex.id!r}, record {idx}: {e}") from e
        outcomes.append(out)
        new_gold.append(replace(rec, box=out.box))
    return replace(ex, gold=tuple(new_gold)), outcomes


def _perturb_worker(args: tuple[Example, GrbpConfig, int]) -> Example:
    ex, cfg, base_seed = args
    return perturb_example(ex, cfg, base_seed)[0]


def perturb_dataset(
    examples: Sequence[Example],
    cfg: GrbpConfig,
    base_seed: int,
    workers: int = 1,
) -> list[Example]:
    """Perturb all gold boxes of a dataset; output order equals input order.

    Any worker count produces output identical to sequential execution.
    """
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(examples) < 2:
        return [perturb_example(ex, cfg, base_seed)[0] for ex in examples]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        jobs = ((ex, cfg, base_seed) for ex in examples)
        return list(pool.map(_perturb_worker, jobs, chunksize=max(1, len(examples) // (workers * 4))))
