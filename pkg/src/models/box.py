import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.errors import InvalidBoxError

# Minimum extent of a box rebuilt from inverted boundaries.
MIN_EXTENT = 1.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in absolute image coordinates (corner form)."""

    l: float
    t: float
    r: float
    b: float
    # Exact [x, y, w, h] the box was read from, so file round-trips are lossless.
    source_xywh: Optional[Tuple[float, float, float, float]] = field(
        default=None, compare=False, repr=False)

    def __post_init__(self):
        coords = (self.l, self.t, self.r, self.b)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidBoxError(f'non-finite box coordinates {coords}')
        if self.l > self.r or self.t > self.b:
            raise InvalidBoxError(f'inverted box {coords}: need l <= r and t <= b')

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> 'BBox':
        if w < 0 or h < 0:
            raise InvalidBoxError(f'negative extent in [x, y, w, h] = {[x, y, w, h]}')
        return cls(float(x), float(y), float(x) + float(w), float(y) + float(h),
                   source_xywh=(x, y, w, h))

    @classmethod
    def clamped(cls, l: float, t: float, r: float, b: float) -> Tuple['BBox', bool]:
        """Build a box, repairing inverted axes instead of rejecting them.

        An inverted pair of boundaries is replaced by their midpoint +/- 0.5 px.
        Returns the box and whether any repair was applied.
        """
        repaired = False
        if l > r:
            mid = (l + r) / 2.0
            l, r = mid - MIN_EXTENT / 2.0, mid + MIN_EXTENT / 2.0
            repaired = True
        if t > b:
            mid = (t + b) / 2.0
            t, b = mid - MIN_EXTENT / 2.0, mid + MIN_EXTENT / 2.0
            repaired = True
        return cls(float(l), float(t), float(r), float(b)), repaired

    @property
    def width(self) -> float:
        return self.r - self.l

    @property
    def height(self) -> float:
        return self.b - self.t

    @property
    def area(self) -> float:
        return self.width * self.height

    def to_xywh(self) -> Tuple[float, float, float, float]:
        if self.source_xywh is not None:
            return self.source_xywh
        return (self.l, self.t, self.width, self.height)

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.t, self.r, self.b], dtype=float)

    def translate(self, dx: float, dy: float) -> 'BBox':
        return BBox(self.l + dx, self.t + dy, self.r + dx, self.b + dy)

    def contains(self, other: 'BBox', tol: float = 0.0) -> bool:
        return (self.l <= other.l + tol and self.t <= other.t + tol
                and self.r >= other.r - tol and self.b >= other.b - tol)

    def clip(self, width: float, height: float) -> 'BBox':
        """Clip to the image rectangle [0, width] x [0, height]."""
        l = min(max(self.l, 0.0), width)
        r = min(max(self.r, 0.0), width)
        t = min(max(self.t, 0.0), height)
        b = min(max(self.b, 0.0), height)
        return BBox(l, t, r, b)

    def to_list(self):
        return [self.l, self.t, self.r, self.b]


def from_xywh(x: float, y: float, w: float, h: float) -> BBox:
    return BBox.from_xywh(x, y, w, h)


def to_xywh(box: BBox) -> Tuple[float, float, float, float]:
    return box.to_xywh()
