"""Validation-set assembly and the eight-scenario experiment harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment as aug
from .dataset import SceneConfig, load_dataset, make_sample
from .errors import ConfigError
from .rng import STREAM_VALIDATION, sub_rng
from .scene import BodyConfig
from .training import TrainConfig, TrainResult, train

# Sub-stream tags for the validation subsets.
_VAL_SINGLE = 1
_VAL_VARIED = 2
_VAL_PLANS = 3


@dataclass
class ValidationSpec:
    """Composition of the validation set.

    Defaults mirror the reference split: 25 synthetic single-leg samples with
    the original skin, 425 synthetic samples with varied skins and both legs,
    plus an optional directory of user-supplied labeled photos. The synthetic
    subsets are regenerated from the seed on demand, keeping the repo
    data-free.
    """

    n_single: int = 25
    n_varied: int = 425
    real_dir: str | None = None
    scenario: int = 1

    def __post_init__(self):
        if self.n_single < 0 or self.n_varied < 0:
            raise ConfigError("validation subset sizes must be >= 0")
        aug.scenario_techniques(self.scenario)


def build_validation(
    spec: ValidationSpec,
    seed: int,
    pool: aug.BackgroundPool | None = None,
    flexion_range=(0.0, 140.0),
    max_offset_deg: float = 10.0,
):
    """Generate the validation samples and apply the scenario's augmentations.

    Augmentation plans are drawn once here and frozen, mirroring a
    pre-augmented validation set; real photos, when provided, are appended
    after the synthetic subsets and augmented the same way.
    """
    single_cfg = SceneConfig(
        flexion_range=flexion_range,
        max_offset_deg=max_offset_deg,
        skin_mode="original",
        body=BodyConfig(both_legs=False),
    )
    varied_cfg = SceneConfig(
        flexion_range=flexion_range,
        max_offset_deg=max_offset_deg,
        skin_mode="varied",
        body=BodyConfig(both_legs=True),
    )
    samples = [make_sample(single_cfg, (seed, STREAM_VALIDATION, _VAL_SINGLE), i) for i in range(spec.n_single)]
    samples += [make_sample(varied_cfg, (seed, STREAM_VALIDATION, _VAL_VARIED), i) for i in range(spec.n_varied)]
    if spec.real_dir is not None:
        samples += load_dataset(Path(spec.real_dir))

    if spec.scenario != 1:
        plan_rng = sub_rng(seed, STREAM_VALIDATION, _VAL_PLANS)
        augmented = []
        for sample in samples:
            plan = aug.sample_plan(plan_rng, spec.scenario, sample.label, pool)
            augmented.append(aug.apply(plan, sample, pool) if not plan.is_identity() else sample)
        samples = augmented
    return samples


@dataclass
class ScenarioOutcome:
    scenario: int
    min_train_loss: float
    min_val_loss: float
    epochs: int
    seed: int
    error: str | None = None


@dataclass
class ExperimentReport:
    outcomes: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["scenario,min_train_loss,min_val_loss,epochs,seed"]
        for o in self.outcomes:
            lines.append(f"{o.scenario},{o.min_train_loss:.6f},{o.min_val_loss:.6f},{o.epochs},{o.seed}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_csv())


def run_experiments(
    scenarios,
    train_samples,
    seed: int = 0,
    epochs: int = 50,
    batch_size: int = 32,
    lr: float = 0.001,
    pool: aug.BackgroundPool | None = None,
    validation_spec: ValidationSpec | None = None,
    on_result=None,
) -> ExperimentReport:
    """Train one fresh Eva per scenario from the same training set.

    Each scenario gets a validation set augmented to match it. A failure in
    one scenario is recorded (NaN losses) without aborting the others.
    """
    base_spec = validation_spec or ValidationSpec()
    report = ExperimentReport()
    for scenario in sorted(set(scenarios)):
        try:
            spec = ValidationSpec(
                n_single=base_spec.n_single,
                n_varied=base_spec.n_varied,
                real_dir=base_spec.real_dir,
                scenario=scenario,
            )
            validation = build_validation(spec, seed, pool)
            config = TrainConfig(
                scenario=scenario,
                epochs=epochs,
                batch_size=batch_size,
                seed=seed,
                lr=lr,
                backgrounds=pool,
                validation=validation,
            )
            result: TrainResult = train(train_samples, config)
            outcome = ScenarioOutcome(
                scenario=scenario,
                min_train_loss=result.min_train_loss(),
                min_val_loss=result.min_val_loss(),
                epochs=epochs,
                seed=seed,
            )
        except (ConfigError, OSError) as exc:
            outcome = ScenarioOutcome(
                scenario=scenario,
                min_train_loss=float("nan"),
                min_val_loss=float("nan"),
                epochs=epochs,
                seed=seed,
                error=str(exc),
            )
        report.outcomes.append(outcome)
        if on_result is not None:
            on_result(outcome)
    return report
