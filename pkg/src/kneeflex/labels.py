"""Keypoint labels and labeled image samples.

A label is the ordered triple (thigh center, knee, lower-leg center) in pixel
coordinates with the origin at the top-left corner and y growing downward.
The flat vector layout (thigh_x, thigh_y, knee_x, knee_y, leg_x, leg_y)
matches the dataset CSV column order and the network output order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IMG_WIDTH = 200
IMG_HEIGHT = 150

CSV_HEADER = "img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y"


def round_half_up(x):
    """Round to nearest integer with .5 going up, elementwise."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class KeypointLabel:
    """Three (x, y) keypoints stored as a (3, 2) float array, row order
    thigh, knee, leg."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(3, 2)

    @classmethod
    def from_points(cls, thigh, knee, leg) -> "KeypointLabel":
        return cls(np.array([thigh, knee, leg], dtype=np.float64))

    @classmethod
    def from_vector(cls, vec) -> "KeypointLabel":
        vec = np.asarray(vec, dtype=np.float64).reshape(6)
        return cls(vec.reshape(3, 2))

    @property
    def thigh(self) -> np.ndarray:
        return self.points[0]

    @property
    def knee(self) -> np.ndarray:
        return self.points[1]

    @property
    def leg(self) -> np.ndarray:
        return self.points[2]

    def as_vector(self) -> np.ndarray:
        """Flat (6,) vector in CSV column order."""
        return self.points.reshape(6).copy()

    def rounded(self) -> np.ndarray:
        """(3, 2) integer coordinates, half-up rounding (the on-disk form)."""
        return round_half_up(self.points)

    def in_raster(self, width: int = IMG_WIDTH, height: int = IMG_HEIGHT) -> bool:
        """True when every point survives integer rounding inside the raster."""
        x, y = self.points[:, 0], self.points[:, 1]
        return bool(
            np.all(x >= 0.0)
            and np.all(y >= 0.0)
            and np.all(x < width - 0.5)
            and np.all(y < height - 0.5)
        )

    def copy(self) -> "KeypointLabel":
        return KeypointLabel(self.points.copy())


@dataclass
class Sample:
    """A 200x150 RGBA raster paired with its keypoint label."""

    image: np.ndarray
    label: KeypointLabel

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.uint8)
        if self.image.shape != (IMG_HEIGHT, IMG_WIDTH, 4):
            raise ValueError(f"expected ({IMG_HEIGHT}, {IMG_WIDTH}, 4) RGBA image, got {self.image.shape}")

    def copy(self) -> "Sample":
        return Sample(self.image.copy(), self.label.copy())


def relative_to_absolute(rel, dims=(IMG_WIDTH, IMG_HEIGHT)):
    """Convert a bottom-left-origin relative (u, v) in [0,1]^2 to top-left-origin
    pixel coordinates: x = u*W, y = (1 - v)*H."""
    u, v = float(rel[0]), float(rel[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError(f"relative coordinates must lie in [0,1]^2, got {rel}")
    w, h = dims
    return (u * w, (1.0 - v) * h)
