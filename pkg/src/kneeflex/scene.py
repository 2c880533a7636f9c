"""Procedural leg scene: posing, camera framing, projection, rendering.

World frame: the treatment table runs along +x, +y points up, and the flexed
leg lies in the z = 0 plane with the hip at the origin. The camera sits on the
+z side and, with zero rotation offset, looks straight down the -z axis so its
axis is perpendicular to the leg plane.

The leg is modeled as two capsules (thigh and shank). Flexing the knee by k
degrees flexes the hip by k/2, which keeps the ankle on the table line
whenever the two segments have equal length, i.e. the heel stays aligned with
the torso.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ProjectionError
from .labels import IMG_HEIGHT, IMG_WIDTH, KeypointLabel

# Principal point of the 200x150 raster; the framed centroid projects here.
CX = IMG_WIDTH / 2.0
CY = IMG_HEIGHT / 2.0

DEFAULT_DISTANCE = 3.0
DEFAULT_FOCAL = 400.0

# Hand-picked base skin tones, light to dark (RGB).
SKIN_PALETTE = (
    (236, 188, 158),
    (224, 172, 138),
    (198, 134, 94),
    (141, 85, 52),
    (87, 48, 27),
)

LIGHT_DIR = np.array([0.0, 1.0, 0.0])  # directional light from above
AMBIENT = 0.25

MAX_KNEE_FLEXION = 140.0


@dataclass
class LegPose:
    """Knee flexion in degrees; hip flexion is derived as half of it."""

    knee_flexion_deg: float
    hip_flexion_deg: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.knee_flexion_deg <= MAX_KNEE_FLEXION:
            raise ConfigError(
                f"knee flexion must be in [0, {MAX_KNEE_FLEXION}], got {self.knee_flexion_deg}"
            )
        self.hip_flexion_deg = self.knee_flexion_deg / 2.0


@dataclass
class BodyConfig:
    """Dimensions and appearance of the rendered leg(s), in world units."""

    thigh_length: float = 0.45
    shank_length: float = 0.45
    thigh_radius: float = 0.075
    shank_radius: float = 0.062
    skin_tone: int = 0
    both_legs: bool = False
    rest_leg_offset: float = 0.22

    def __post_init__(self):
        for name in ("thigh_length", "shank_length", "thigh_radius", "shank_radius"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.skin_tone < len(SKIN_PALETTE):
            raise ConfigError(f"skin_tone must index the {len(SKIN_PALETTE)}-tone palette")


@dataclass
class CameraPose:
    """Camera aimed at `look_at` from `distance` away, rotated off the leg
    plane's normal by the yaw/pitch offsets (degrees)."""

    yaw_offset_deg: float
    pitch_offset_deg: float
    distance: float
    focal: float
    look_at: np.ndarray

    def __post_init__(self):
        self.look_at = np.asarray(self.look_at, dtype=np.float64).reshape(3)


@dataclass
class JointPositions:
    """World positions of the flexed leg's hip, knee, and ankle."""

    hip: np.ndarray
    knee: np.ndarray
    ankle: np.ndarray

    def centroid(self) -> np.ndarray:
        return (self.hip + self.knee + self.ankle) / 3.0


def sample_pose(rng: np.random.Generator, flexion_range=(0.0, MAX_KNEE_FLEXION)) -> LegPose:
    """Draw a knee flexion angle uniformly from `flexion_range` degrees."""
    lo, hi = float(flexion_range[0]), float(flexion_range[1])
    if not (0.0 <= lo <= hi <= MAX_KNEE_FLEXION):
        raise ConfigError(f"flexion range must satisfy 0 <= lo <= hi <= {MAX_KNEE_FLEXION}")
    return LegPose(knee_flexion_deg=float(rng.uniform(lo, hi)))


def leg_world_geometry(pose: LegPose, body: BodyConfig) -> JointPositions:
    """Forward kinematics of the flexed leg.

    The thigh is rotated up from the table line by the hip flexion; the shank
    deviates from the thigh's extension by the knee flexion, so its absolute
    angle is hip - knee = -k/2.
    """
    hip = np.zeros(3)
    h = math.radians(pose.hip_flexion_deg)
    s = math.radians(pose.hip_flexion_deg - pose.knee_flexion_deg)
    knee = hip + body.thigh_length * np.array([math.cos(h), math.sin(h), 0.0])
    ankle = knee + body.shank_length * np.array([math.cos(s), math.sin(s), 0.0])
    return JointPositions(hip=hip, knee=knee, ankle=ankle)


def frame_camera(
    joints: JointPositions,
    rng: np.random.Generator,
    max_offset_deg: float,
    distance: float = DEFAULT_DISTANCE,
    focal: float = DEFAULT_FOCAL,
) -> CameraPose:
    """Aim the camera at the hip/knee/ankle centroid with a random rotation
    offset drawn uniformly from +-max_offset_deg on each axis."""
    if max_offset_deg < 0:
        raise ConfigError("max_offset_deg must be >= 0")
    yaw = float(rng.uniform(-max_offset_deg, max_offset_deg))
    pitch = float(rng.uniform(-max_offset_deg, max_offset_deg))
    return CameraPose(
        yaw_offset_deg=yaw,
        pitch_offset_deg=pitch,
        distance=distance,
        focal=focal,
        look_at=joints.centroid(),
    )


def _rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def camera_basis(camera: CameraPose):
    """Return (eye, right, up, forward) unit world vectors for the camera."""
    offset_dir = _rot_y(camera.yaw_offset_deg) @ _rot_x(camera.pitch_offset_deg) @ np.array([0.0, 0.0, 1.0])
    eye = camera.look_at + camera.distance * offset_dir
    forward = camera.look_at - eye
    forward /= np.linalg.norm(forward)
    world_up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, world_up)
    nr = np.linalg.norm(right)
    if nr < 1e-12:
        raise ConfigError("camera axis parallel to world up; reduce pitch offset")
    right /= nr
    up = np.cross(right, forward)
    return eye, right, up, forward


def project(point3, camera: CameraPose):
    """Pinhole-project a world point into pixel coordinates (top-left origin)."""
    eye, right, up, forward = camera_basis(camera)
    d = np.asarray(point3, dtype=np.float64) - eye
    z = float(d @ forward)
    if z <= 1e-9:
        raise ProjectionError("point at or behind the camera plane")
    x = CX + camera.focal * float(d @ right) / z
    y = CY - camera.focal * float(d @ up) / z
    return (x, y)


def compute_keypoints(pose: LegPose, body: BodyConfig, camera: CameraPose) -> KeypointLabel:
    """Project the thigh midpoint, knee joint, and shank midpoint."""
    joints = leg_world_geometry(pose, body)
    thigh_mid = (joints.hip + joints.knee) / 2.0
    leg_mid = (joints.knee + joints.ankle) / 2.0
    return KeypointLabel.from_points(
        project(thigh_mid, camera),
        project(joints.knee, camera),
        project(leg_mid, camera),
    )


def scene_capsules(pose: LegPose, body: BodyConfig, skin_rgb=None):
    """Capsules to render: the flexed leg, plus a straight resting leg placed
    behind it (farther from the camera) when both_legs is set.

    Returns a list of (a, b, radius, rgb) tuples.
    """
    rgb = np.array(skin_rgb if skin_rgb is not None else SKIN_PALETTE[body.skin_tone], dtype=np.float64)
    joints = leg_world_geometry(pose, body)
    capsules = [
        (joints.hip, joints.knee, body.thigh_radius, rgb),
        (joints.knee, joints.ankle, body.shank_radius, rgb),
    ]
    if body.both_legs:
        shift = np.array([0.0, 0.0, -body.rest_leg_offset])
        rest = leg_world_geometry(LegPose(0.0), body)
        capsules.append((rest.hip + shift, rest.knee + shift, body.thigh_radius, rgb))
        capsules.append((rest.knee + shift, rest.ankle + shift, body.shank_radius, rgb))
    return capsules


def _ray_capsule_hits(eye, dirs, a, b, radius):
    """Entry distance t >= 0 of each ray into the capsule (a, b, radius), or
    +inf where a ray misses. `dirs` is (H, W, 3) of unit directions."""
    ba = b - a
    oa = eye - a
    baba = float(ba @ ba)
    bard = dirs @ ba
    baoa = float(oa @ ba)
    rdoa = dirs @ oa
    oaoa = float(oa @ oa)

    inf = np.inf
    t_best = np.full(dirs.shape[:2], inf)

    # Cylindrical body, restricted to the segment's axial span.
    qa = baba - bard * bard
    qb = baba * rdoa - baoa * bard
    qc = baba * oaoa - baoa * baoa - radius * radius * baba
    disc = qb * qb - qa * qc
    ok = (disc >= 0.0) & (qa > 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        t_body = np.where(ok, (-qb - np.sqrt(np.where(ok, disc, 0.0))) / np.where(ok, qa, 1.0), inf)
    axial = baoa + t_body * bard
    body_hit = ok & (t_body > 0.0) & (axial > 0.0) & (axial < baba)
    t_best = np.where(body_hit, t_body, t_best)

    # Spherical caps at both ends.
    for center in (a, b):
        oc = eye - center
        sb = dirs @ oc
        sc = float(oc @ oc) - radius * radius
        sd = sb * sb - sc
        ok_cap = sd >= 0.0
        t_cap = np.where(ok_cap, -sb - np.sqrt(np.where(ok_cap, sd, 0.0)), inf)
        cap_hit = ok_cap & (t_cap > 0.0)
        t_best = np.minimum(t_best, np.where(cap_hit, t_cap, inf))
    return t_best


def render_scene(pose: LegPose, body: BodyConfig, camera: CameraPose, skin_rgb=None) -> np.ndarray:
    """Render the scene to a 200x150 RGBA array.

    Every ray is intersected with each capsule; the nearest hit wins the
    pixel. Shading is Lambertian under the overhead directional light plus a
    constant ambient term, so the underside of the leg stays visible. The
    background is fully transparent and coverage is binary (alpha 0 or 255).
    """
    eye, right, up, forward = camera_basis(camera)

    px = (np.arange(IMG_WIDTH) + 0.5 - CX) / camera.focal
    py = (CY - (np.arange(IMG_HEIGHT) + 0.5)) / camera.focal
    dirs = (
        px[None, :, None] * right[None, None, :]
        + py[:, None, None] * up[None, None, :]
        + forward[None, None, :]
    )
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)

    t_buf = np.full((IMG_HEIGHT, IMG_WIDTH), np.inf)
    color = np.zeros((IMG_HEIGHT, IMG_WIDTH, 3))
    for a, b, radius, rgb in scene_capsules(pose, body, skin_rgb):
        t = _ray_capsule_hits(eye, dirs, a, b, radius)
        closer = t < t_buf
        if not closer.any():
            continue
        hit_pts = eye + t[closer, None] * dirs[closer]
        ba = b - a
        baba = float(ba @ ba)
        s = np.clip(((hit_pts - a) @ ba) / baba, 0.0, 1.0)
        normals = hit_pts - a - s[:, None] * ba
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        shade = AMBIENT + (1.0 - AMBIENT) * np.maximum(0.0, normals @ LIGHT_DIR)
        color[closer] = shade[:, None] * rgb
        t_buf[closer] = t[closer]

    image = np.zeros((IMG_HEIGHT, IMG_WIDTH, 4), dtype=np.uint8)
    covered = np.isfinite(t_buf)
    image[..., :3][covered] = np.clip(np.floor(color[covered] + 0.5), 0, 255).astype(np.uint8)
    image[..., 3][covered] = 255
    return image
