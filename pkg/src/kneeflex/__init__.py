"""kneeflex: synthetic leg datasets, a from-scratch keypoint CNN, and knee
flexion goniometry."""

from .augment import AugmentPlan, BackgroundPool, apply, composite_background, hflip, prepare_backgrounds, rotate, sample_plan, translate
from .dataset import SceneConfig, generate_dataset, load_dataset, make_sample
from .goniometry import annotate, flexion_angle, predict
from .labels import IMG_HEIGHT, IMG_WIDTH, KeypointLabel, Sample, relative_to_absolute
from .network import Network, build_eva, images_to_batch, labels_to_batch
from .scene import BodyConfig, CameraPose, LegPose, compute_keypoints, frame_camera, leg_world_geometry, project, render_scene, sample_pose
from .training import RmsProp, TrainConfig, euclid_loss, euclid_loss_grad, evaluate, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
