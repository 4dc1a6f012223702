"""A small fully-connected Q-network with hand-written backpropagation.

Hidden layers use the rectifier; the output layer is linear, one unit per
action. Weight matrices are stored as (fan_in, fan_out) so a batch of row
vectors maps through ``x @ W + b``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (ContractViolation, ShapeMismatch, VersionMismatch,
                     WeightFileError, WeightFileMissing)

FORMAT_VERSION = 1
DEFAULT_HIDDEN = (24, 24)


class _Layers:
    def __init__(self, weights, biases):
        self.weights = list(weights)
        self.biases = list(biases)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def _check_congruent(self, other):
        if [a.shape for a in self.arrays()] != [a.shape for a in other.arrays()]:
            raise ContractViolation("parameter shapes do not match")


class NetworkParams(_Layers):
    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def equals(self, other: "NetworkParams") -> bool:
        return self.layer_dims == other.layer_dims and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for a in self.arrays():
            a[...] = vec[pos:pos + a.size].reshape(a.shape)
            pos += a.size


class GradientSet(_Layers):
    def __mul__(self, k: float) -> "GradientSet":
        return GradientSet([w * k for w in self.weights], [b * k for b in self.biases])

    __rmul__ = __mul__

    def __add__(self, other: "GradientSet") -> "GradientSet":
        self._check_congruent(other)
        return GradientSet([a + b for a, b in zip(self.weights, other.weights)],
                           [a + b for a, b in zip(self.biases, other.biases)])


@dataclass
class WeightedBatch:
    states: np.ndarray  # (N, in) feature rows
    actions: np.ndarray  # (N,) int
    targets: np.ndarray  # (N,)
    weights: np.ndarray  # (N,) positive

    def __post_init__(self):
        n = len(self.states)
        if not len(self.actions) == len(self.targets) == len(self.weights) == n:
            raise ContractViolation("batch fields must share one length")


def network_dims(n_inputs: int, n_actions: int, hidden=DEFAULT_HIDDEN) -> list[int]:
    return [n_inputs, *hidden, n_actions]


def init_params(dims, rng: np.random.Generator) -> NetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    dims = list(dims)
    if len(dims) < 2 or min(dims) < 1:
        raise ContractViolation(f"invalid layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.weights[0].shape[0]:
        raise ContractViolation(
            f"input has {x.shape[-1]} features, network expects {params.weights[0].shape[0]}")
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h


def forward_cached(params: NetworkParams, x: np.ndarray):
    """Forward pass that keeps each layer's input for :func:`backward`."""
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise ContractViolation("forward_cached expects a (batch, n_inputs) array")
    inputs = []
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
    return h, inputs


def backward(params: NetworkParams, inputs, d_out: np.ndarray) -> GradientSet:
    """Gradients of a scalar loss given its derivative w.r.t. the outputs."""
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    delta = d_out
    for k in range(n_layers - 1, -1, -1):
        gw[k] = inputs[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k > 0:
            # inputs[k] is the rectified output of layer k-1
            delta = (delta @ params.weights[k].T) * (inputs[k] > 0.0)
    return GradientSet(gw, gb)


def loss_and_gradients(params: NetworkParams, batch: WeightedBatch):
    """Importance-weighted mean squared TD error and its exact gradient."""
    q, inputs = forward_cached(params, np.asarray(batch.states, dtype=float))
    n = len(batch.targets)
    rows = np.arange(n)
    err = batch.targets - q[rows, batch.actions]
    loss = float(np.sum(batch.weights * err * err) / n)
    d_out = np.zeros_like(q)
    d_out[rows, batch.actions] = -2.0 * batch.weights * err / n
    return loss, backward(params, inputs, d_out)


def sgd_step(params: NetworkParams, grads: GradientSet, lr: float) -> NetworkParams:
    """In-place ``theta <- theta - lr * g``; returns ``params`` for chaining."""
    if lr <= 0:
        raise ContractViolation("learning rate must be positive")
    params._check_congruent(grads)
    for p, g in zip(params.arrays(), grads.arrays()):
        p -= lr * g
    return params


def sync_target(online: NetworkParams) -> NetworkParams:
    return online.copy()


def l2_penalty(params: NetworkParams) -> float:
    return float(sum(np.sum(a * a) for a in params.arrays()))


def save(params: NetworkParams, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "layer_dims": params.layer_dims,
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load(path, expected_dims=None) -> NetworkParams:
    if not os.path.exists(path):
        raise WeightFileMissing(f"no weight file at {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise VersionMismatch(f"{path} is not a weight file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: expected format_version {FORMAT_VERSION}")
    try:
        dims = [int(d) for d in doc["layer_dims"]]
        weights = [np.array(w, dtype=float).reshape(i, o)
                   for w, i, o in zip(doc["weights"], dims[:-1], dims[1:])]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeMismatch(f"{path}: malformed arrays ({exc})") from exc
    if len(weights) != len(dims) - 1 or [len(b) for b in biases] != dims[1:]:
        raise ShapeMismatch(f"{path}: arrays disagree with layer_dims {dims}")
    if expected_dims is not None and list(expected_dims) != dims:
        raise ShapeMismatch(f"{path}: layer dims {dims}, expected {list(expected_dims)}")
    params = NetworkParams(weights, biases)
    if not all(np.isfinite(a).all() for a in params.arrays()):
        raise WeightFileError(f"{path}: non-finite parameters")
    return params
