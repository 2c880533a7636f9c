"""Dataset generation and the PNG + CSV on-disk format.

A dataset directory holds 0.png ... (n-1).png (200x150 RGBA) and a labels.csv
with header img,thigh_x,thigh_y,knee_x,knee_y,leg_x,leg_y. Coordinates are
stored as integers (half-up rounding); in-memory labels stay real-valued.

Sample i is fully determined by (seed, i): its RNG streams are derived from
the pair, so generation is reproducible and independent of worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import rng as rngmod
from .errors import ConfigError, FramingError
from .labels import CSV_HEADER, IMG_HEIGHT, IMG_WIDTH, KeypointLabel, Sample
from .rng import sub_rng
from .scene import (
    SKIN_PALETTE,
    BodyConfig,
    compute_keypoints,
    frame_camera,
    leg_world_geometry,
    render_scene,
    sample_pose,
)

MAX_FRAMING_RETRIES = 10


@dataclass
class SceneConfig:
    """Knobs of the generation process."""

    flexion_range: tuple = (0.0, 140.0)
    max_offset_deg: float = 10.0
    both_legs: bool = False
    skin_mode: str = "original"  # "original" keeps body.skin_tone, "varied" randomizes
    body: BodyConfig = field(default_factory=BodyConfig)

    def __post_init__(self):
        lo, hi = self.flexion_range
        if not (0.0 <= lo <= hi <= 140.0):
            raise ConfigError(f"flexion range must satisfy 0 <= lo <= hi <= 140, got {self.flexion_range}")
        if self.max_offset_deg < 0:
            raise ConfigError("max offset must be >= 0")
        if self.skin_mode not in ("original", "varied"):
            raise ConfigError(f"skin_mode must be 'original' or 'varied', got {self.skin_mode!r}")


def make_sample(config: SceneConfig, seed_keys, index: int) -> Sample:
    """Generate sample `index` of the dataset addressed by `seed_keys`.

    Camera offsets are redrawn up to MAX_FRAMING_RETRIES times when a keypoint
    would fall outside the raster; clamping is never used because clamped
    labels would be wrong labels.
    """
    keys = tuple(seed_keys) if isinstance(seed_keys, (tuple, list)) else (seed_keys,)
    pose_rng = sub_rng(*keys, rngmod.STREAM_POSE, index)
    cam_rng = sub_rng(*keys, rngmod.STREAM_CAMERA, index)
    skin_rng = sub_rng(*keys, rngmod.STREAM_SKIN, index)

    body = config.body
    if config.skin_mode == "varied":
        body = BodyConfig(
            thigh_length=body.thigh_length,
            shank_length=body.shank_length,
            thigh_radius=body.thigh_radius,
            shank_radius=body.shank_radius,
            skin_tone=int(skin_rng.integers(len(SKIN_PALETTE))),
            both_legs=body.both_legs,
            rest_leg_offset=body.rest_leg_offset,
        )

    pose = sample_pose(pose_rng, config.flexion_range)
    joints = leg_world_geometry(pose, body)
    for _ in range(MAX_FRAMING_RETRIES):
        camera = frame_camera(joints, cam_rng, config.max_offset_deg)
        label = compute_keypoints(pose, body, camera)
        if label.in_raster():
            return Sample(render_scene(pose, body, camera), label)
    raise FramingError(
        f"sample {index}: keypoints stayed off-raster after {MAX_FRAMING_RETRIES} camera redraws"
    )


def save_png(image: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGBA").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGBA"), dtype=np.uint8)


def write_labels_csv(path, rows) -> None:
    """Write (index, KeypointLabel) pairs with integer coordinates, LF endings."""
    lines = [CSV_HEADER]
    for index, label in rows:
        coords = label.rounded().reshape(6)
        lines.append(",".join([str(int(index))] + [str(int(c)) for c in coords]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def read_labels_csv(path):
    """Return a list of (index, KeypointLabel) in file order."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {header!r}")
        rows = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise ConfigError(f"malformed CSV row {line!r}")
            rows.append((int(parts[0]), KeypointLabel.from_vector([float(p) for p in parts[1:]])))
    return rows


def _render_indexed(args):
    config, keys, index = args
    sample = make_sample(config, keys, index)
    return index, sample.image, sample.label.points


def generate_dataset(config: SceneConfig, n_samples: int, seed: int, out_dir, threads: int = 1) -> None:
    """Write n_samples PNGs plus labels.csv under out_dir, deterministically.

    File writes are serialized in the main process; with threads > 1 the
    rendering is farmed out per sample, which cannot change the output because
    every sample owns its own RNG streams.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    keys = (int(seed),)
    jobs = [(config, keys, i) for i in range(n_samples)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_render_indexed, jobs, chunksize=16))
    else:
        results = [_render_indexed(job) for job in jobs]

    rows = []
    for index, image, points in results:
        save_png(image, out / f"{index}.png")
        rows.append((index, KeypointLabel(points)))
    write_labels_csv(out / "labels.csv", rows)


def load_dataset(data_dir):
    """Load a generated (or user-supplied) dataset directory into Samples.

    Images that are not 200x150 are resized bilinearly and their labels are
    scaled by the same factors.
    """
    data_dir = Path(data_dir)
    csv_path = data_dir / "labels.csv"
    if not csv_path.exists():
        raise ConfigError(f"no labels.csv in {data_dir}")
    samples = []
    for index, label in read_labels_csv(csv_path):
        png = data_dir / f"{index}.png"
        if not png.exists():
            raise ConfigError(f"missing image {png}")
        with Image.open(png) as im:
            rgba = im.convert("RGBA")
            if rgba.size != (IMG_WIDTH, IMG_HEIGHT):
                sx = IMG_WIDTH / rgba.size[0]
                sy = IMG_HEIGHT / rgba.size[1]
                rgba = rgba.resize((IMG_WIDTH, IMG_HEIGHT), Image.BILINEAR)
                label = KeypointLabel(label.points * np.array([sx, sy]))
            samples.append(Sample(np.asarray(rgba, dtype=np.uint8), label))
    return samples
