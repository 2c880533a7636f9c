"""Flexion angles from keypoints, predictions, and annotated overlays.

Convention: 0 degrees at full extension (the three points collinear with the
knee in the middle), growing as the knee bends. The angle is unsigned.
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image

from .labels import IMG_HEIGHT, IMG_WIDTH, KeypointLabel, Sample
from .network import Network

DEGENERATE_DISTANCE = 1e-6

MARKER_RADIUS = 2
LINE_COLOR = (255, 0, 0, 255)


def flexion_angle(label: KeypointLabel) -> float:
    """Knee flexion in degrees: 180 minus the angle at the knee between the
    thigh and lower-leg points."""
    a = label.thigh
    b = label.knee
    c = label.leg
    u = a - b
    v = c - b
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < DEGENERATE_DISTANCE or nv < DEGENERATE_DISTANCE:
        raise ValueError("knee coincides with another keypoint; angle undefined")
    cos_knee = float(np.clip((u @ v) / (nu * nv), -1.0, 1.0))
    return 180.0 - math.degrees(math.acos(cos_knee))


def predict(net: Network, image) -> KeypointLabel:
    """Run the network on one image and decode the six outputs as a label.

    Accepts RGBA or opaque RGB arrays of any size; inputs are resized to
    200x150 first. Out-of-frame predictions are reported as-is, never
    clamped.
    """
    arr = np.asarray(image, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ValueError(f"expected (H, W, 3|4) image, got {arr.shape}")
    if arr.shape[2] == 3:
        opaque = np.full((*arr.shape[:2], 4), 255, dtype=np.uint8)
        opaque[..., :3] = arr
        arr = opaque
    if arr.shape[:2] != (IMG_HEIGHT, IMG_WIDTH):
        im = Image.fromarray(arr, "RGBA").resize((IMG_WIDTH, IMG_HEIGHT), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.uint8)
    batch = arr[None].astype(np.float32) / 255.0
    x = batch[..., :3] * batch[..., 3:4]
    out = net.forward(x, training=False)
    return KeypointLabel.from_vector(np.asarray(out[0], dtype=np.float64))


def _draw_disc(img: np.ndarray, x: float, y: float, radius: int, color) -> None:
    x0 = max(0, int(math.floor(x - radius)))
    x1 = min(IMG_WIDTH - 1, int(math.ceil(x + radius)))
    y0 = max(0, int(math.floor(y - radius)))
    y1 = min(IMG_HEIGHT - 1, int(math.ceil(y + radius)))
    for yy in range(y0, y1 + 1):
        for xx in range(x0, x1 + 1):
            if (xx - x) ** 2 + (yy - y) ** 2 <= radius**2:
                img[yy, xx] = color


def _draw_segment(img: np.ndarray, p0, p1, color) -> None:
    """Dense-sampled line segment, clipped at the raster bounds."""
    length = float(np.hypot(p1[0] - p0[0], p1[1] - p0[1]))
    steps = max(2, int(math.ceil(length * 2)))
    for t in np.linspace(0.0, 1.0, steps):
        x = p0[0] + t * (p1[0] - p0[0])
        y = p0[1] + t * (p1[1] - p0[1])
        xi, yi = int(round(x)), int(round(y))
        if 0 <= xi < IMG_WIDTH and 0 <= yi < IMG_HEIGHT:
            img[yi, xi] = color


def annotate(image: np.ndarray, label: KeypointLabel) -> np.ndarray:
    """Red polyline thigh -> knee -> leg plus point markers, on a copy."""
    arr = np.asarray(image, dtype=np.uint8)
    if arr.shape[2] == 3:
        out = np.full((*arr.shape[:2], 4), 255, dtype=np.uint8)
        out[..., :3] = arr
    else:
        out = arr.copy()
    _draw_segment(out, label.thigh, label.knee, LINE_COLOR)
    _draw_segment(out, label.knee, label.leg, LINE_COLOR)
    for point in label.points:
        _draw_disc(out, point[0], point[1], MARKER_RADIUS, LINE_COLOR)
    return out


def predict_sample(net: Network, sample: Sample):
    """Convenience: predicted label and its flexion angle for one sample."""
    pred = predict(net, sample.image)
    return pred, flexion_angle(pred)
