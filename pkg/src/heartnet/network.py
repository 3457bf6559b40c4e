"""Dense feedforward network: representation, forward sweep, hand-derived
backpropagation, and JSON persistence.

Every weighted sum is one ``np.dot`` call per neuron, whether run inline
or on a :class:`~heartnet.parallel.NeuronPool`, so forward and backward
results are bit-identical for any worker count.  Gradients are taken of
half the sum of squared errors, which gives the output delta its clean
``(o - t) * o * (1 - o)`` form; training history still reports raw SSE.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FormatError, decode_output
from .parallel import NeuronPool

LOGISTIC_SIGMOID = "logistic-sigmoid"
MODEL_FORMAT_VERSION = 1

# One input layer, up to three hidden, one output; raise via the
# max_layers argument where a deeper stack is genuinely wanted.
DEFAULT_MAX_LAYERS = 5

INIT_WEIGHT_RANGE = 0.5  # initial weights drawn uniformly from +/- this


def sigmoid(x: float) -> float:
    """Logistic transfer function 1 / (1 + e^-x), safe for any magnitude."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    t = math.exp(x)
    return t / (1.0 + t)


@dataclass
class Network:
    """Ordered dense layers; ``weights[l]`` has shape (out, in)."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = LOGISTIC_SIGMOID
    seed: int | None = None

    @property
    def n_layers(self) -> int:
        """Count of weighted (non-input) layers."""
        return len(self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Network":
        return Network(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            seed=self.seed,
        )


@dataclass
class Gradients:
    """Loss gradients shaped exactly like the network, plus the per-layer
    delta vectors they were built from."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    deltas: list[np.ndarray]


def _validate_layer_sizes(layer_sizes, max_layers: int) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    if len(sizes) > max_layers:
        raise ValueError(
            f"{len(sizes)} layers exceeds the cap of {max_layers}; "
            "pass max_layers to override"
        )
    if any(s < 1 for s in sizes):
        raise ValueError(f"every layer needs at least one neuron: {sizes}")
    return sizes


def new_network(layer_sizes, seed: int, max_layers: int = DEFAULT_MAX_LAYERS) -> Network:
    """Build a network with weights and biases drawn uniformly from
    [-0.5, 0.5] by a seeded generator; the same seed reproduces the same
    network bit for bit."""
    sizes = _validate_layer_sizes(layer_sizes, max_layers)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, (n_out, n_in)))
        biases.append(rng.uniform(-INIT_WEIGHT_RANGE, INIT_WEIGHT_RANGE, n_out))
    return Network(layer_sizes=sizes, weights=weights, biases=biases, seed=seed)


def forward(network: Network, features, pool: NeuronPool | None = None) -> list[np.ndarray]:
    """Run one input through every layer; returns the activation vector of
    each layer, index 0 being the input itself."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.shape != (network.layer_sizes[0],):
        raise ValueError(
            f"input must have shape ({network.layer_sizes[0]},), got {x.shape}"
        )
    activations = [x]
    prev = x
    for layer_weights, layer_biases in zip(network.weights, network.biases):
        out = np.empty(layer_weights.shape[0], dtype=np.float64)

        def weigh_neurons(lo: int, hi: int, w=layer_weights, b=layer_biases, a=prev, out=out):
            # One dot per neuron keeps the reduction order independent of
            # how neurons are distributed over workers.
            for i in range(lo, hi):
                out[i] = sigmoid(b[i] + np.dot(w[i], a))

        if pool is None:
            weigh_neurons(0, out.shape[0])
        else:
            pool.run(out.shape[0], weigh_neurons)
        activations.append(out)
        prev = out
    return activations


def sse(output, target) -> float:
    """Sum of squared errors between an output vector and its target."""
    out = np.asarray(output, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if out.shape != tgt.shape:
        raise ValueError(f"shape mismatch: output {out.shape} vs target {tgt.shape}")
    err = tgt - out
    return float(np.dot(err, err))


def backward(
    network: Network,
    activations: list[np.ndarray],
    target,
    pool: NeuronPool | None = None,
) -> Gradients:
    """Backpropagate the output error through the layers.

    The output delta is ``(o - t) * o * (1 - o)``; each hidden delta is
    the next layer's weighted delta sum scaled by the local sigmoid
    derivative.  Returned gradients are of SSE/2 with respect to every
    weight and bias.
    """
    if len(activations) != network.n_layers + 1:
        raise ValueError(
            f"expected {network.n_layers + 1} activation vectors, got {len(activations)}"
        )
    for size, act in zip(network.layer_sizes, activations):
        if act.shape != (size,):
            raise ValueError(f"activation shape {act.shape} does not match layer size {size}")
    tgt = np.asarray(target, dtype=np.float64)
    if tgt.shape != activations[-1].shape:
        raise ValueError(f"target shape {tgt.shape} does not match output layer")

    deltas: list[np.ndarray] = [np.empty(0)] * network.n_layers
    out = activations[-1]
    deltas[-1] = (out - tgt) * out * (1.0 - out)

    for layer in range(network.n_layers - 2, -1, -1):
        act = activations[layer + 1]
        next_weights = network.weights[layer + 1]
        next_delta = deltas[layer + 1]
        delta = np.empty(act.shape[0], dtype=np.float64)

        def weigh_deltas(lo: int, hi: int, w=next_weights, nd=next_delta, a=act, out=delta):
            for j in range(lo, hi):
                out[j] = np.dot(w[:, j], nd) * a[j] * (1.0 - a[j])

        if pool is None:
            weigh_deltas(0, delta.shape[0])
        else:
            pool.run(delta.shape[0], weigh_deltas)
        deltas[layer] = delta

    weight_grads = [
        np.outer(deltas[layer], activations[layer]) for layer in range(network.n_layers)
    ]
    bias_grads = [d.copy() for d in deltas]
    return Gradients(weights=weight_grads, biases=bias_grads, deltas=deltas)


def predict(network: Network, features, pool: NeuronPool | None = None) -> int:
    """Forward sweep followed by class-code decoding of the output layer."""
    return decode_output(forward(network, features, pool)[-1])


def network_to_dict(network: Network) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(network.layer_sizes),
        "activation": network.activation,
        "seed": network.seed,
        "weights": [w.tolist() for w in network.weights],
        "biases": [b.tolist() for b in network.biases],
    }


def network_from_dict(payload: dict, source: str = "model") -> Network:
    if not isinstance(payload, dict):
        raise FormatError(f"{source}: expected a JSON object")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"{source}: format_version {version!r} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        sizes = tuple(int(s) for s in payload["layer_sizes"])
        weights = [np.array(w, dtype=np.float64) for w in payload["weights"]]
        biases = [np.array(b, dtype=np.float64) for b in payload["biases"]]
        activation = str(payload["activation"])
        seed = payload.get("seed")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed model payload ({exc})") from None
    if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
        raise FormatError(f"{source}: layer count does not match layer_sizes")
    for idx, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if weights[idx].shape != (n_out, n_in) or biases[idx].shape != (n_out,):
            raise FormatError(f"{source}: weight shapes do not match layer_sizes")
    return Network(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        activation=activation,
        seed=seed if seed is None else int(seed),
    )


def save_network(network: Network, path) -> None:
    """Serialize to JSON; float values round-trip bit-exactly."""
    Path(path).write_text(
        json.dumps(network_to_dict(network), indent=2) + "\n", encoding="utf-8"
    )


def load_network(path) -> Network:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return network_from_dict(payload, source=str(path))
