"""Minimal dense neural-network kernel.

Just enough to train the cross-attention weighting module: linear layers
with ReLU between them, analytic backpropagation, a numerically stable
softmax, an adaptive-moment optimizer, and a finite-difference gradient
checker. Everything runs in float64 so gradient checks have an unambiguous
1e-6 target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ShapeMismatchError


@dataclass
class MlpParams:
    """Weights and biases of a plain MLP.

    Layer k maps h -> weights[k] @ h + biases[k]; ReLU is applied between
    layers and never after the last one. Consecutive layer dimensions must
    chain.
    """

    weights: list[NDArray[np.float64]]
    biases: list[NDArray[np.float64]]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeMismatchError("need matching, non-empty weight and bias lists")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeMismatchError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeMismatchError(
                    f"layer {k} input dim {w.shape[1]} != layer {k - 1} output dim"
                )

    @property
    def dims(self) -> list[int]:
        """Layer widths, input first: [in, hidden..., out]."""
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(dims: list[int], seed: int) -> MlpParams:
    """Seeded Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def mlp_forward(params: MlpParams, x: NDArray[np.float64]):
    """Run the MLP on one input vector.

    Returns:
        (output, tape) where the tape caches the layer inputs and
        pre-activations needed by mlp_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.dims[0]:
        raise ShapeMismatchError(f"input length {x.shape} != expected {params.dims[0]}")
    inputs, preacts = [], []
    h = x
    last = params.num_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = w @ h + b
        preacts.append(z)
        h = np.maximum(z, 0.0) if k < last else z
    return h, (inputs, preacts)


def mlp_backward(params: MlpParams, tape, output_grad: NDArray[np.float64]):
    """Analytic gradients of the forward map.

    Args:
        tape: cache from the matching mlp_forward call.
        output_grad: gradient of the loss w.r.t. the MLP output.

    Returns:
        ((weight_grads, bias_grads), input_grad). The ReLU subgradient at
        exactly zero is taken as zero.
    """
    inputs, preacts = tape
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != (params.dims[-1],):
        raise ShapeMismatchError(f"output grad shape {g.shape} != ({params.dims[-1]},)")
    weight_grads = [None] * params.num_layers
    bias_grads = [None] * params.num_layers
    last = params.num_layers - 1
    for k in range(last, -1, -1):
        if k < last:
            g = g * (preacts[k] > 0.0)
        weight_grads[k] = np.outer(g, inputs[k])
        bias_grads[k] = g.copy()
        g = params.weights[k].T @ g
    return (weight_grads, bias_grads), g


def softmax_stable(logits: NDArray[np.float64]) -> NDArray[np.float64]:
    """Softmax with the max subtracted first so large logits cannot overflow."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def softmax_vjp(probs: NDArray[np.float64], grad: NDArray[np.float64]) -> NDArray[np.float64]:
    """Backpropagate through softmax given its output `probs`."""
    dot = float(np.dot(grad, probs))
    return probs * (grad - dot)


@dataclass
class AdamState:
    """Adaptive-moment optimizer state shaped like a set of MLP parameters."""

    m_w: list[NDArray[np.float64]]
    v_w: list[NDArray[np.float64]]
    m_b: list[NDArray[np.float64]]
    v_b: list[NDArray[np.float64]]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 1e-3) -> AdamState:
        return cls(
            m_w=[np.zeros_like(w) for w in params.weights],
            v_w=[np.zeros_like(w) for w in params.weights],
            m_b=[np.zeros_like(b) for b in params.biases],
            v_b=[np.zeros_like(b) for b in params.biases],
            lr=lr,
        )


def adam_step(params: MlpParams, grads, state: AdamState) -> None:
    """One in-place adaptive-moment update with bias correction."""
    weight_grads, bias_grads = grads
    if len(weight_grads) != params.num_layers or len(bias_grads) != params.num_layers:
        raise ShapeMismatchError("gradient layer count does not match parameters")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for k in range(params.num_layers):
        for p, g, m, v in (
            (params.weights[k], weight_grads[k], state.m_w[k], state.v_w[k]),
            (params.biases[k], bias_grads[k], state.m_b[k], state.v_b[k]),
        ):
            if g.shape != p.shape:
                raise ShapeMismatchError(f"layer {k}: grad shape {g.shape} != param {p.shape}")
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def flatten_params(params: MlpParams) -> NDArray[np.float64]:
    """Concatenate all weights then biases into one vector (fixed order)."""
    parts = [w.ravel() for w in params.weights] + [b for b in params.biases]
    return np.concatenate(parts)


def unflatten_params(vec: NDArray[np.float64], template: MlpParams) -> MlpParams:
    """Inverse of flatten_params for parameters shaped like `template`."""
    vec = np.asarray(vec, dtype=np.float64)
    weights, biases = [], []
    off = 0
    for w in template.weights:
        weights.append(vec[off : off + w.size].reshape(w.shape).copy())
        off += w.size
    for b in template.biases:
        biases.append(vec[off : off + b.size].copy())
        off += b.size
    if off != vec.size:
        raise ShapeMismatchError(f"vector length {vec.size} != parameter count {off}")
    return MlpParams(weights, biases)


def flatten_grads(grads) -> NDArray[np.float64]:
    weight_grads, bias_grads = grads
    return np.concatenate([g.ravel() for g in weight_grads] + list(bias_grads))


def gradcheck(f, x0: NDArray[np.float64], n_probes: int = 64, h: float = 1e-5, seed: int = 0) -> float:
    """Compare an analytic gradient against central finite differences.

    Args:
        f: map from a parameter vector to (scalar value, gradient vector).
        x0: point at which to check.
        n_probes: number of randomly probed coordinates (all coordinates
            if the vector is smaller).
        h: central-difference step.

    Returns:
        The maximum relative error over the probed coordinates. The
        denominator is floored at a small fraction of the gradient's
        overall scale so coordinates with (near-)zero gradient do not
        amplify finite-difference noise.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _, analytic = f(x0)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x0.shape:
        raise ShapeMismatchError("analytic gradient shape does not match parameters")

    rng = np.random.default_rng(seed)
    if n_probes >= x0.size:
        coords = np.arange(x0.size)
    else:
        coords = rng.choice(x0.size, size=n_probes, replace=False)

    scale = max(float(np.max(np.abs(analytic))), 1e-12)
    floor = 1e-3 * scale
    worst = 0.0
    for i in coords:
        xp = x0.copy()
        xp[i] += h
        fp, _ = f(xp)
        xm = x0.copy()
        xm[i] -= h
        fm, _ = f(xm)
        fd = (fp - fm) / (2.0 * h)
        denom = max(abs(fd), abs(analytic[i]), floor)
        worst = max(worst, abs(fd - analytic[i]) / denom)
    return worst


def params_to_dict(params: MlpParams, seed: int | None = None) -> dict:
    """JSON-serializable form: {"layers": [{"w": ..., "b": ...}], "meta": ...}."""
    meta: dict = {"dims": params.dims}
    if seed is not None:
        meta["seed"] = seed
    return {
        "layers": [
            {"w": w.tolist(), "b": b.tolist()} for w, b in zip(params.weights, params.biases)
        ],
        "meta": meta,
    }


def params_from_dict(obj: dict) -> MlpParams:
    layers = obj["layers"]
    return MlpParams(
        [np.asarray(layer["w"], dtype=np.float64) for layer in layers],
        [np.asarray(layer["b"], dtype=np.float64) for layer in layers],
    )


def save_params(path, params: MlpParams, seed: int | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_dict(params, seed), fh)


def load_params(path) -> MlpParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
