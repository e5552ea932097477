"""Axis-aligned box arithmetic: validation, IoU, clipping, center-size conversion.

Coordinates are real-valued pixels with a top-left origin (x grows rightward,
y grows downward).  Areas follow the continuous convention
``area = (x2 - x1) * (y2 - y1)`` with no +1 pixel inclusivity; two boxes that
share only an edge have zero intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateClipError, InputError, InvalidBoxError


@dataclass(frozen=True)
class Box:
    """Rectangle with top-left corner (x1, y1) and bottom-right corner (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InvalidBoxError(f"box coordinate {name}={v!r} must be a finite number")
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise InvalidBoxError(
                "box must have strictly positive width and height, got "
                f"({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class CenterSize:
    """Box expressed as center coordinates plus width and height."""

    c_x: float
    c_y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("c_x", "c_y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InvalidBoxError(f"center-size field {name}={v!r} must be a finite number")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"center-size extent must be positive, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class ImageDims:
    """Image width and height in pixels."""

    width: int
    height: int

    def __post_init__(self) -> None:
        for name in ("width", "height"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InputError(f"image {name} must be a positive integer, got {v!r}")


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0.0 when interiors do not overlap."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def to_center_size(b: Box) -> CenterSize:
    """Convert corner representation to center plus size."""
    return CenterSize((b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2, b.x2 - b.x1, b.y2 - b.y1)


def to_box(cs: CenterSize) -> Box:
    """Convert center plus size back to corner representation."""
    hw = cs.w / 2
    hh = cs.h / 2
    return Box(cs.c_x - hw, cs.c_y - hh, cs.c_x + hw, cs.c_y + hh)


def clip_to_image(b: Box, dims: ImageDims) -> Box:
    """Clamp a box to [0, W] x [0, H].

    Raises DegenerateClipError when the box lies entirely outside the image,
    i.e. clamping would leave zero extent.
    """
    x1 = min(max(b.x1, 0.0), float(dims.width))
    y1 = min(max(b.y1, 0.0), float(dims.height))
    x2 = min(max(b.x2, 0.0), float(dims.width))
    y2 = min(max(b.y2, 0.0), float(dims.height))
    if x2 <= x1 or y2 <= y1:
        raise DegenerateClipError(
            f"box ({b.x1}, {b.y1}, {b.x2}, {b.y2}) has no extent inside a "
            f"{dims.width}x{dims.height} image"
        )
    return Box(x1, y1, x2, y2)


def box_within(b: Box, dims: ImageDims) -> bool:
    """True when the box lies fully inside [0, W] x [0, H]."""
    return b.x1 >= 0 and b.y1 >= 0 and b.x2 <= dims.width and b.y2 <= dims.height
