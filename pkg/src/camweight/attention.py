"""Cross-attention view weighting: learned correlation of pose embeddings.

The target pose embedding is dotted against each source pose embedding,
scaled by 1/sqrt(attention_dim) so softmax gradients survive large
embedding widths, and softmaxed onto the simplex. Training freezes the
renderer (its volumes and analytic decoder) and fits only the embedding
parameters against rendered-image MSE.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DivergedTrainingError, ShapeMismatchError
from .embedding import (
    EmbeddingConfig,
    EncodingConfig,
    GEOMETRIC_MLP,
    embed_pose_with_tape,
    embedding_backward,
    init_embedding,
)
from .nn import AdamState, adam_step, params_from_dict, params_to_dict, softmax_stable, softmax_vjp
from .pose import CameraRig
from .renderer import FeatureVolume, Frustum, render_novel_view_with_weight_vjp


@dataclass
class CawModule:
    """The learned weighting function: one shared pose-embedding network.

    Target and source poses run through the same parameters; the paper's
    diagram draws a single embedding box, and sharing keeps the module
    permutation-equivariant by construction.
    """

    embedding: EmbeddingConfig

    @property
    def attention_dim(self) -> int:
        return self.embedding.attention_dim


def init_caw(
    variant: str = GEOMETRIC_MLP,
    seed: int = 0,
    hidden_dim: int = 64,
    attention_dim: int = 128,
) -> CawModule:
    return CawModule(init_embedding(variant, seed, hidden_dim, attention_dim))


def caw_logits(module: CawModule, rig: CameraRig):
    """Scaled target-source embedding correlations, with tapes for backprop."""
    t_emb, t_tape = embed_pose_with_tape(rig.target, module.embedding)
    s_embs, s_tapes = [], []
    for src in rig.sources:
        emb, tape = embed_pose_with_tape(src, module.embedding)
        s_embs.append(emb)
        s_tapes.append(tape)
    s_embs = np.stack(s_embs)
    scale = 1.0 / math.sqrt(module.attention_dim)
    logits = (s_embs @ t_emb) * scale
    return logits, (t_emb, t_tape, s_embs, s_tapes, scale)


def caw_weights(module: CawModule, rig: CameraRig) -> NDArray[np.float64]:
    """Softmax of scaled embedding correlations; always strictly positive."""
    logits, _ = caw_logits(module, rig)
    return softmax_stable(logits)


@dataclass
class RenderContext:
    """Everything the frozen renderer needs to turn weights into pixels."""

    volumes: list[FeatureVolume]
    frustum: Frustum
    resolution: tuple[int, int]
    n_samples: int = 32
    seed: int = 0


@dataclass
class TrainingExample:
    """One supervised example: a rig, its render context, and the target image."""

    rig: CameraRig
    context: RenderContext
    target_image: NDArray[np.float64]

    def __post_init__(self) -> None:
        width, height = self.context.resolution
        if self.target_image.shape != (height, width, 3):
            raise ShapeMismatchError(
                f"target image shape {self.target_image.shape} != {(height, width, 3)}"
            )
        if len(self.context.volumes) != self.rig.num_sources:
            raise ShapeMismatchError("one feature volume per rig source is required")


def caw_loss_and_grads(module: CawModule, example: TrainingExample):
    """Pixel-MSE loss of the weighted render and gradients for the module.

    Only the embedding parameters receive gradients; the renderer's
    volumes and decoder are frozen. The render is linear in the weights
    before the decoder, so the weight adjoint is exact.
    """
    logits, (t_emb, t_tape, s_embs, s_tapes, scale) = caw_logits(module, example.rig)
    weights = softmax_stable(logits)

    ctx = example.context
    image, vjp = render_novel_view_with_weight_vjp(
        ctx.volumes, ctx.frustum, weights, ctx.resolution, ctx.n_samples, ctx.seed
    )
    diff = image - example.target_image
    loss = float(np.mean(diff * diff))
    grad_image = 2.0 * diff / diff.size

    grad_w = vjp(grad_image)
    grad_logits = softmax_vjp(weights, grad_w)

    grad_t_emb = scale * (grad_logits @ s_embs)
    wgrads, bgrads = embedding_backward(module.embedding, t_tape, grad_t_emb)
    for i, tape in enumerate(s_tapes):
        gw, gb = embedding_backward(module.embedding, tape, scale * grad_logits[i] * t_emb)
        for k in range(len(wgrads)):
            wgrads[k] += gw[k]
            bgrads[k] += gb[k]
    return loss, (wgrads, bgrads)


def train_caw(
    module: CawModule,
    examples: list[TrainingExample],
    epochs: int,
    seed: int = 0,
    lr: float = 1e-3,
):
    """Fit the module on a set of examples with per-example Adam steps.

    Examples are visited in a freshly seeded shuffle each epoch, one
    gradient step per example, so the run is deterministic given the seed.

    Returns:
        (module, per-epoch mean losses).

    Raises:
        DivergedTrainingError: if any step's loss is non-finite.
    """
    if not examples:
        raise ValueError("need at least one training example")
    state = AdamState.for_params(module.embedding.mlp, lr=lr)
    history: list[float] = []
    for epoch in range(epochs):
        order = np.random.default_rng([int(seed), epoch]).permutation(len(examples))
        losses = []
        for idx in order:
            loss, grads = caw_loss_and_grads(module, examples[idx])
            if not math.isfinite(loss):
                raise DivergedTrainingError(f"loss became non-finite at epoch {epoch}")
            adam_step(module.embedding.mlp, grads, state)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return module, history


def caw_to_dict(module: CawModule) -> dict:
    obj = params_to_dict(module.embedding.mlp)
    obj["variant"] = module.embedding.variant
    obj["attention_dim"] = module.embedding.attention_dim
    obj["hidden_dim"] = module.embedding.hidden_dim
    if module.embedding.encoding is not None:
        enc = module.embedding.encoding
        obj["encoding"] = {
            "num_freqs": enc.num_freqs,
            "freq_factor": enc.freq_factor,
            "include_input": enc.include_input,
        }
    return obj


def caw_from_dict(obj: dict) -> CawModule:
    encoding = None
    if "encoding" in obj:
        encoding = EncodingConfig(**obj["encoding"])
    embedding = EmbeddingConfig(
        variant=obj["variant"],
        mlp=params_from_dict(obj),
        encoding=encoding,
        hidden_dim=obj.get("hidden_dim", 64),
        attention_dim=obj["attention_dim"],
    )
    return CawModule(embedding)


def save_caw(path, module: CawModule) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(caw_to_dict(module), fh)


def load_caw(path) -> CawModule:
    with open(path, "r", encoding="utf-8") as fh:
        return caw_from_dict(json.load(fh))
