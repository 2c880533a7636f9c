"""The Eva model: a small convolutional network trained from scratch.

Layer stack (input 150x200x3, channel-last):

    Conv 3x3,  3->32, ReLU   -> (148, 198, 32)    896 params
    MaxPool 2x2              -> ( 74,  99, 32)
    Conv 4x4, 32->64, ReLU   -> ( 71,  96, 64)  32832 params
    MaxPool 2x2              -> ( 35,  48, 64)
    Conv 3x3, 64-> 4, ReLU   -> ( 33,  46,  4)   2308 params
    MaxPool 2x2              -> ( 16,  23,  4)
    Flatten                  -> (1472,)
    Dropout 0.5
    Dense 1472->100, ReLU            147300 params
    Dense  100-> 50, ReLU              5050 params
    Dense   50->  6, linear             306 params

Total 188,692 parameters. The six outputs are the keypoint coordinates in
CSV column order (thigh_x, thigh_y, knee_x, knee_y, leg_x, leg_y).
"""

from __future__ import annotations

import numpy as np

from .labels import IMG_HEIGHT, IMG_WIDTH
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2x2
from .rng import STREAM_DROPOUT, STREAM_INIT, sub_rng

INPUT_SHAPE = (IMG_HEIGHT, IMG_WIDTH, 3)
OUTPUT_SIZE = 6
EVA_DROPOUT_RATE = 0.5


class Network:
    """An ordered stack of named layers with forward/backward plumbing."""

    def __init__(self, layers):
        self.layers = list(layers)  # (name, layer) pairs

    def forward(self, x, training=False):
        for _, layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    def backward(self, grad):
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self):
        """Flat list of (qualified name, array) in layer order; the arrays are
        the live weights, mutated in place by the optimizer."""
        out = []
        for name, layer in self.layers:
            if hasattr(layer, "params"):
                out.extend((f"{name}.{pname}", arr) for pname, arr in layer.params())
        return out

    def gradients(self):
        """Gradients aligned one-to-one with parameters()."""
        out = []
        for name, layer in self.layers:
            if hasattr(layer, "grads"):
                out.extend((f"{name}.{pname}", arr) for pname, arr in layer.grads())
        return out

    def param_count(self) -> int:
        return sum(layer.param_count() for _, layer in self.layers)

    def get_weights(self):
        return [(name, arr.copy()) for name, arr in self.parameters()]

    def set_weights(self, named_arrays):
        current = dict(self.parameters())
        for name, arr in named_arrays:
            if name not in current:
                raise ValueError(f"unknown parameter {name!r}")
            if current[name].shape != arr.shape:
                raise ValueError(f"shape mismatch for {name!r}: {current[name].shape} vs {arr.shape}")
            current[name][...] = arr

    def dropout_layers(self):
        return [layer for _, layer in self.layers if isinstance(layer, Dropout)]

    def summary(self, input_shape=INPUT_SHAPE):
        """(layer name, output shape sans batch, param count) per layer,
        from a dry batch-1 forward in inference mode."""
        x = np.zeros((1, *input_shape), dtype=np.float32)
        rows = []
        for name, layer in self.layers:
            x = layer.forward(x, training=False)
            rows.append((name, x.shape[1:], layer.param_count()))
        return rows


def build_eva(seed: int = 0) -> Network:
    """Construct Eva with Glorot-uniform weights drawn from `seed`."""
    init = sub_rng(seed, STREAM_INIT)
    dropout_rng = sub_rng(seed, STREAM_DROPOUT)
    return Network(
        [
            ("conv1", Conv2D(3, 3, 3, 32, init)),
            ("pool1", MaxPool2x2()),
            ("conv2", Conv2D(4, 4, 32, 64, init)),
            ("pool2", MaxPool2x2()),
            ("conv3", Conv2D(3, 3, 64, 4, init)),
            ("pool3", MaxPool2x2()),
            ("flatten", Flatten()),
            ("dropout", Dropout(EVA_DROPOUT_RATE, dropout_rng)),
            ("dense1", Dense(1472, 100, init)),
            ("dense2", Dense(100, 50, init)),
            ("dense3", Dense(50, OUTPUT_SIZE, init, relu=False)),
        ]
    )


def images_to_batch(samples) -> np.ndarray:
    """Stack samples into a (B, 150, 200, 3) float32 batch scaled to [0, 1].

    Transparency is resolved onto black: rgb/255 weighted by alpha/255, so
    background-composited (opaque) samples pass through unchanged.
    """
    imgs = np.stack([s.image for s in samples]).astype(np.float32) / 255.0
    return imgs[..., :3] * imgs[..., 3:4]


def labels_to_batch(samples) -> np.ndarray:
    """Stack labels into a (B, 6) float64 target batch in CSV column order."""
    return np.stack([s.label.as_vector() for s in samples])
