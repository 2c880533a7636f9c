"""Label-consistent image augmentation.

Four techniques: horizontal flips (with the thigh/leg label swap that keeps
the triple ordered left-to-right), translations, rotations about the raster
center, and replacement of the transparent background with a pre-blurred
photo. Geometric transforms always co-transform the labels; a plan whose
transformed labels would leave the raster is resampled a bounded number of
times and then degrades to the identity.

Scenario ids 1..8 name the technique subsets used by the training
experiments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError
from .labels import IMG_HEIGHT, IMG_WIDTH, KeypointLabel, Sample

DX_RANGE = (-20, 20)
DY_RANGE = (-10, 30)
ALPHA_RANGE = (-30.0, 30.0)
FLIP_PROB = 0.5
MAX_PLAN_RETRIES = 10

# Rotation pivot: center of the pixel grid.
ROT_CX = (IMG_WIDTH - 1) / 2.0
ROT_CY = (IMG_HEIGHT - 1) / 2.0

SCENARIOS = {
    1: frozenset(),
    2: frozenset({"flip"}),
    3: frozenset({"translate"}),
    4: frozenset({"background"}),
    5: frozenset({"rotate"}),
    6: frozenset({"flip", "translate"}),
    7: frozenset({"flip", "translate", "rotate"}),
    8: frozenset({"flip", "translate", "rotate", "background"}),
}


def scenario_techniques(scenario_id: int) -> frozenset:
    if scenario_id not in SCENARIOS:
        raise ConfigError(f"scenario must be in 1..8, got {scenario_id}")
    return SCENARIOS[scenario_id]


@dataclass
class AugmentPlan:
    """One sampled transform combination; disabled techniques stay identity."""

    flip: bool = False
    dx: int = 0
    dy: int = 0
    alpha: float = 0.0
    background: int | None = None

    def is_identity(self) -> bool:
        return not self.flip and self.dx == 0 and self.dy == 0 and self.alpha == 0.0 and self.background is None


@dataclass
class BackgroundPool:
    """Opaque 200x150 RGB rasters, already blurred, ready to composite."""

    images: list

    def __post_init__(self):
        for img in self.images:
            if img.shape != (IMG_HEIGHT, IMG_WIDTH, 3) or img.dtype != np.uint8:
                raise ConfigError("background images must be 200x150 uint8 RGB")

    def __len__(self) -> int:
        return len(self.images)


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian with edge-replicate padding (mass-conserving away
    from borders, constants map to themselves)."""
    if sigma <= 0:
        return img.astype(np.float64)
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    out = img.astype(np.float64)
    for axis in (0, 1):
        pad = [(0, 0)] * out.ndim
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, mode="edge")
        windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.size, axis=axis)
        out = np.tensordot(windows, kernel, axes=([out.ndim], [0]))
    return out


def _crop_resize(rgb: Image.Image) -> Image.Image:
    """Center-crop to the 4:3 target aspect, then resize to 200x150."""
    w, h = rgb.size
    target = IMG_WIDTH / IMG_HEIGHT
    if w / h > target:
        new_w = int(round(h * target))
        x0 = (w - new_w) // 2
        rgb = rgb.crop((x0, 0, x0 + new_w, h))
    elif w / h < target:
        new_h = int(round(w / target))
        y0 = (h - new_h) // 2
        rgb = rgb.crop((0, y0, w, y0 + new_h))
    return rgb.resize((IMG_WIDTH, IMG_HEIGHT), Image.BILINEAR)


def prepare_backgrounds(background_dir, sigma: float = 2.0) -> BackgroundPool:
    """Load every decodable image under background_dir, normalize each to a
    blurred opaque 200x150 RGB raster. Undecodable files are skipped with a
    warning; an empty result is an error."""
    paths = sorted(p for p in Path(background_dir).iterdir() if p.is_file())
    if not paths:
        raise ConfigError(f"no files in background directory {background_dir}")
    images = []
    for path in paths:
        try:
            with Image.open(path) as im:
                rgb = _crop_resize(im.convert("RGB"))
        except (UnidentifiedImageError, OSError) as exc:
            warnings.warn(f"skipping undecodable background {path.name}: {exc}")
            continue
        blurred = _gaussian_blur(np.asarray(rgb, dtype=np.uint8), sigma)
        images.append(np.clip(np.floor(blurred + 0.5), 0, 255).astype(np.uint8))
    if not images:
        raise ConfigError(f"no decodable images in background directory {background_dir}")
    return BackgroundPool(images)


def hflip(sample: Sample) -> Sample:
    """Mirror pixels about the vertical axis; x -> (W-1) - x on every label,
    and the thigh/leg labels trade places so the triple still reads
    left-to-right."""
    points = sample.label.points.copy()
    points[:, 0] = (IMG_WIDTH - 1) - points[:, 0]
    points = points[::-1].copy()  # swap thigh and leg, knee stays in place
    return Sample(sample.image[:, ::-1].copy(), KeypointLabel(points))


def translate(sample: Sample, dx: int, dy: int) -> Sample:
    """Shift pixels by whole pixels, transparent fill; labels move with them.
    Positive dy moves content downward (y grows downward)."""
    dx, dy = int(dx), int(dy)
    image = np.zeros_like(sample.image)
    h, w = IMG_HEIGHT, IMG_WIDTH
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    if src_x.stop > src_x.start and src_y.stop > src_y.start:
        image[dst_y, dst_x] = sample.image[src_y, src_x]
    return Sample(image, KeypointLabel(sample.label.points + np.array([dx, dy], dtype=np.float64)))


def _rotate_points(points: np.ndarray, alpha_deg: float) -> np.ndarray:
    """Rotate (N, 2) pixel points about the raster center; positive angles
    turn clockwise on screen under the y-down convention."""
    a = math.radians(alpha_deg)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    center = np.array([ROT_CX, ROT_CY])
    return (points - center) @ rot.T + center


def rotate(sample: Sample, alpha: float) -> Sample:
    """Rotate image and labels about the raster center with bilinear sampling
    and transparent fill."""
    if alpha == 0.0:
        return sample.copy()
    a = math.radians(alpha)
    cos_a, sin_a = math.cos(a), math.sin(a)

    ys, xs = np.mgrid[0:IMG_HEIGHT, 0:IMG_WIDTH].astype(np.float64)
    rel_x = xs - ROT_CX
    rel_y = ys - ROT_CY
    # Inverse map: output pixel samples the input at R(-alpha).
    src_x = cos_a * rel_x + sin_a * rel_y + ROT_CX
    src_y = -sin_a * rel_x + cos_a * rel_y + ROT_CY

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0

    img = sample.image.astype(np.float64)
    out = np.zeros((IMG_HEIGHT, IMG_WIDTH, 4), dtype=np.float64)
    for oy, ox, weight in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + ox
        yi = y0 + oy
        inside = (xi >= 0) & (xi < IMG_WIDTH) & (yi >= 0) & (yi < IMG_HEIGHT)
        contrib = np.zeros((IMG_HEIGHT, IMG_WIDTH, 4))
        contrib[inside] = img[yi[inside], xi[inside]]
        out += weight[..., None] * contrib

    rotated = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return Sample(rotated, KeypointLabel(_rotate_points(sample.label.points, alpha)))


def composite_background(sample: Sample, background: np.ndarray) -> Sample:
    """Alpha-over the sample onto an opaque background: out = fg*a + bg*(1-a)."""
    a = sample.image[..., 3:4].astype(np.float64) / 255.0
    fg = sample.image[..., :3].astype(np.float64)
    bg = background.astype(np.float64)
    rgb = fg * a + bg * (1.0 - a)
    out = np.empty((IMG_HEIGHT, IMG_WIDTH, 4), dtype=np.uint8)
    out[..., :3] = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    out[..., 3] = 255
    return Sample(out, sample.label.copy())


def plan_label_points(plan: AugmentPlan, points: np.ndarray) -> np.ndarray:
    """Labels after the plan's geometric chain flip -> translate -> rotate."""
    pts = points.copy()
    if plan.flip:
        pts[:, 0] = (IMG_WIDTH - 1) - pts[:, 0]
        pts = pts[::-1].copy()
    pts += np.array([plan.dx, plan.dy], dtype=np.float64)
    if plan.alpha != 0.0:
        pts = _rotate_points(pts, plan.alpha)
    return pts


def _points_in_raster(points: np.ndarray) -> bool:
    x, y = points[:, 0], points[:, 1]
    return bool(
        np.all(x >= 0.0) and np.all(y >= 0.0) and np.all(x < IMG_WIDTH - 0.5) and np.all(y < IMG_HEIGHT - 0.5)
    )


def sample_plan(
    rng: np.random.Generator,
    scenario_id: int,
    label: KeypointLabel,
    pool: BackgroundPool | None = None,
) -> AugmentPlan:
    """Draw a plan for one sample under the scenario's enabled techniques.

    Redraws when the transformed labels would leave the raster; after
    MAX_PLAN_RETRIES failures the geometric part degrades to the identity
    (the background draw, which never moves labels, is kept).
    """
    techniques = scenario_techniques(scenario_id)
    if "background" in techniques and (pool is None or len(pool) == 0):
        raise ConfigError(f"scenario {scenario_id} needs a background pool")

    background = int(rng.integers(len(pool))) if "background" in techniques else None
    for _ in range(MAX_PLAN_RETRIES):
        plan = AugmentPlan(
            flip="flip" in techniques and bool(rng.random() < FLIP_PROB),
            dx=int(rng.integers(DX_RANGE[0], DX_RANGE[1] + 1)) if "translate" in techniques else 0,
            dy=int(rng.integers(DY_RANGE[0], DY_RANGE[1] + 1)) if "translate" in techniques else 0,
            alpha=float(rng.uniform(*ALPHA_RANGE)) if "rotate" in techniques else 0.0,
            background=background,
        )
        if _points_in_raster(plan_label_points(plan, label.points)):
            return plan
    return AugmentPlan(background=background)


def apply(plan: AugmentPlan, sample: Sample, pool: BackgroundPool | None = None) -> Sample:
    """Apply the plan in order flip -> translate -> rotate -> background."""
    out = sample
    if plan.flip:
        out = hflip(out)
    if plan.dx != 0 or plan.dy != 0:
        out = translate(out, plan.dx, plan.dy)
    if plan.alpha != 0.0:
        out = rotate(out, plan.alpha)
    if plan.background is not None:
        if pool is None:
            raise ConfigError("plan references a background but no pool was given")
        out = composite_background(out, pool.images[plan.background])
    if out is sample:
        out = sample.copy()
    return out
