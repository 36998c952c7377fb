"""Minimal dense-network kernel: forward, exact backprop, Adam, MC dropout.

Float64 throughout so tests can make bit-level claims. Dropout is the
inverted variant (kept activations scaled by 1/(1-p)) and applies to hidden
activations only, never to the output layer. A deterministic forward is
requested by passing rng=None, which is exactly equivalent to dropout_p=0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, UsageError

CKPT_FORMAT = "ckpt/1"
_CKPT_MAGIC = b"ckpt/1\n"
OUTPUT_ACTIVATIONS = ("tanh", "identity")
_OUT_INIT_SCALE = 1e-3  # uniform bound for the output layer at init


@dataclass
class Trace:
    """Intermediates captured by forward_trace, consumed by backward."""

    inputs: list[np.ndarray]  # input to each layer (post-dropout activations)
    relu_pos: list[np.ndarray]  # hidden pre-activation > 0 masks
    masks: list[np.ndarray] | None  # scaled dropout masks per hidden layer
    output: np.ndarray


class Mlp:
    """Fully connected ReLU network with a tanh or identity output layer.

    layer_sizes includes input and output, e.g. [21, 256, 256, 2]. With
    rng=None all parameters start at zero; otherwise hidden layers use He
    initialisation and the output layer small uniform weights.
    """

    def __init__(
        self,
        layer_sizes,
        output_activation: str = "tanh",
        dropout_p: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> None:
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigurationError(f"invalid layer sizes {sizes}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigurationError(f"unknown output activation {output_activation!r}")
        if not 0.0 <= dropout_p < 1.0:
            raise ConfigurationError(f"dropout_p must be in [0, 1), got {dropout_p}")
        self.layer_sizes = sizes
        self.output_activation = output_activation
        self.dropout_p = float(dropout_p)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if rng is None:
                w = np.zeros((n_in, n_out))
            elif i == last:
                w = rng.uniform(-_OUT_INIT_SCALE, _OUT_INIT_SCALE, (n_in, n_out))
            else:
                w = rng.normal(0.0, math.sqrt(2.0 / n_in), (n_in, n_out))
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_hidden(self) -> int:
        return self.n_layers - 1

    def parameters(self) -> list[np.ndarray]:
        """Live parameter arrays, weights then bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> Mlp:
        dup = Mlp(self.layer_sizes, self.output_activation, self.dropout_p, rng=None)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def draw_masks(self, batch: int, rng: np.random.Generator | None) -> list[np.ndarray] | None:
        """Sample inverted-dropout masks for each hidden layer, or None."""
        if rng is None or self.dropout_p == 0.0 or self.n_hidden == 0:
            return None
        keep = 1.0 - self.dropout_p
        return [
            (rng.random((batch, w.shape[1])) >= self.dropout_p).astype(np.float64) / keep
            for w in self.weights[:-1]
        ]

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Forward pass; stochastic when rng is given and dropout_p > 0."""
        x2, squeeze = self._as_batch(x)
        y = self._run(x2, self.draw_masks(x2.shape[0], rng), trace=None)
        return y[0] if squeeze else y

    def forward_trace(
        self, x: np.ndarray, rng: np.random.Generator | None = None
    ) -> tuple[np.ndarray, Trace]:
        x2, _ = self._as_batch(x)
        trace = Trace(inputs=[], relu_pos=[], masks=self.draw_masks(x2.shape[0], rng), output=None)
        y = self._run(x2, trace.masks, trace=trace)
        trace.output = y
        return y, trace

    def forward_given_masks(self, x: np.ndarray, masks: list[np.ndarray] | None) -> np.ndarray:
        """Forward with fixed dropout masks (used by gradient checks)."""
        x2, squeeze = self._as_batch(x)
        y = self._run(x2, masks, trace=None)
        return y[0] if squeeze else y

    def _as_batch(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
            squeeze = True
        elif arr.ndim == 2:
            squeeze = False
        else:
            raise UsageError(f"input must be a vector or batch, got shape {arr.shape}")
        if arr.shape[1] != self.layer_sizes[0]:
            raise UsageError(f"input dim {arr.shape[1]} does not match network input {self.layer_sizes[0]}")
        return arr, squeeze

    def _run(self, x: np.ndarray, masks, trace: Trace | None) -> np.ndarray:
        h = x
        for i in range(self.n_hidden):
            if trace is not None:
                trace.inputs.append(h)
            pre = h @ self.weights[i] + self.biases[i]
            if trace is not None:
                trace.relu_pos.append(pre > 0.0)
            h = np.maximum(pre, 0.0)
            if masks is not None:
                h = h * masks[i]
        if trace is not None:
            trace.inputs.append(h)
        pre = h @ self.weights[-1] + self.biases[-1]
        return np.tanh(pre) if self.output_activation == "tanh" else pre

    def backward(
        self, trace: Trace, upstream: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Exact reverse-mode gradients for the traced forward pass.

        upstream is dLoss/dOutput, shape (batch, out). Returns per-layer
        (dW, db) plus dLoss/dInput. Gradients are summed over the batch;
        put any 1/batch factor into upstream.
        """
        delta = np.asarray(upstream, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        if delta.shape != trace.output.shape:
            raise UsageError(f"upstream shape {delta.shape} does not match output {trace.output.shape}")
        if self.output_activation == "tanh":
            delta = delta * (1.0 - trace.output**2)
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads[i] = (trace.inputs[i].T @ delta, delta.sum(axis=0))
            delta = delta @ self.weights[i].T
            if i > 0:
                if trace.masks is not None:
                    delta = delta * trace.masks[i - 1]
                delta = delta * trace.relu_pos[i - 1]
        return grads, delta

    def grad_arrays(self, grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
        """Flatten backward() output to match parameters()."""
        out = []
        for dw, db in grads:
            out.append(dw)
            out.append(db)
        return out


class Adam:
    """Adam with bias correction, applied in place to a parameter list."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        if lr <= 0.0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise UsageError("parameter/gradient lists do not match optimizer state")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def mc_statistics(
    net: Mlp, x: np.ndarray, n_passes: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population variance of stochastic forwards on one input.

    With dropout_p = 0 the passes are all identical, so the exact values
    (deterministic output, zero variance) are returned without drawing
    randomness.
    """
    if n_passes < 2:
        raise UsageError(f"n_passes must be >= 2, got {n_passes}")
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise UsageError(f"mc_statistics expects a single input vector, got shape {arr.shape}")
    if net.dropout_p == 0.0:
        y = net.forward(arr)
        return y, np.zeros_like(y)
    batch = np.tile(arr, (n_passes, 1))
    ys = net.forward(batch, rng=rng)
    return ys.mean(axis=0), ys.var(axis=0)


def polyak_update(target: Mlp, live: Mlp, tau: float) -> None:
    """target <- tau * live + (1 - tau) * target, parameter-wise."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigurationError(f"tau must be in [0, 1], got {tau}")
    for tp, lp in zip(target.parameters(), live.parameters()):
        tp *= 1.0 - tau
        tp += tau * lp


def save_checkpoint(net: Mlp, mode: str, path: str | Path) -> None:
    """Write a ckpt/1 file: magic, JSON header line, little-endian float64 blob."""
    header = {
        "format": CKPT_FORMAT,
        "mode": mode,
        "layer_sizes": net.layer_sizes,
        "dropout_p": net.dropout_p,
        "hidden_activation": "relu",
        "output_activation": net.output_activation,
    }
    blob = bytearray()
    for w, b in zip(net.weights, net.biases):
        blob += np.ascontiguousarray(w, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(b, dtype="<f8").tobytes()
    payload = _CKPT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + bytes(blob)
    Path(path).write_bytes(payload)


def load_checkpoint(path: str | Path) -> tuple[Mlp, str]:
    """Load a ckpt/1 file, returning the network and its training mode tag."""
    raw = Path(path).read_bytes()
    if not raw.startswith(_CKPT_MAGIC):
        raise ConfigurationError(f"{path} is not a {CKPT_FORMAT} checkpoint (bad magic)")
    rest = raw[len(_CKPT_MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise ConfigurationError(f"{path}: missing checkpoint header")
    try:
        header = json.loads(rest[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: malformed checkpoint header: {exc}") from exc
    expected = {"format", "mode", "layer_sizes", "dropout_p", "hidden_activation", "output_activation"}
    if set(header) != expected:
        raise ConfigurationError(f"{path}: checkpoint header keys {sorted(header)} != {sorted(expected)}")
    if header["format"] != CKPT_FORMAT:
        raise ConfigurationError(f"{path}: unsupported checkpoint format {header['format']!r}")
    if header["hidden_activation"] != "relu":
        raise ConfigurationError(f"{path}: unsupported hidden activation {header['hidden_activation']!r}")
    net = Mlp(header["layer_sizes"], header["output_activation"], header["dropout_p"], rng=None)
    blob = rest[nl + 1:]
    need = sum(w.size + b.size for w, b in zip(net.weights, net.biases)) * 8
    if len(blob) != need:
        raise ConfigurationError(f"{path}: parameter blob is {len(blob)} bytes, expected {need}")
    offset = 0
    for w, b in zip(net.weights, net.biases):
        for arr in (w, b):
            n = arr.size * 8
            arr[...] = np.frombuffer(blob[offset:offset + n], dtype="<f8").reshape(arr.shape)
            offset += n
    return net, str(header["mode"])
