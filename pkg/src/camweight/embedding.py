"""Pose-to-vector embeddings for the attention-based weighting scheme.

Two variants: the geometric one Fourier-encodes the camera center,
concatenates the view direction, and runs a small MLP; the flattened one
feeds the raw 4x4 matrix through two linear layers. Both emit a vector of
the attention dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ShapeMismatchError
from .nn import MlpParams, init_mlp, mlp_backward, mlp_forward
from .pose import Pose, camera_center, view_direction

GEOMETRIC_MLP = "geometric_mlp"
FLATTENED_LINEAR = "flattened_linear"


@dataclass(frozen=True)
class EncodingConfig:
    """Fourier-feature encoding of a 3-vector.

    Frequencies are freq_factor * 2^j for j in [0, num_freqs); the raw
    input is prepended when include_input is set.
    """

    num_freqs: int = 6
    freq_factor: float = 1.5
    include_input: bool = True

    def __post_init__(self) -> None:
        if self.num_freqs < 1:
            raise ValueError("num_freqs must be >= 1")
        if self.freq_factor <= 0:
            raise ValueError("freq_factor must be positive")

    @property
    def out_dim(self) -> int:
        return 3 * (2 * self.num_freqs + (1 if self.include_input else 0))


@dataclass
class EmbeddingConfig:
    """A pose-embedding network: variant tag, encoding, and MLP parameters."""

    variant: str
    mlp: MlpParams
    encoding: EncodingConfig | None = None
    hidden_dim: int = 64
    attention_dim: int = 128

    def __post_init__(self) -> None:
        if self.variant not in (GEOMETRIC_MLP, FLATTENED_LINEAR):
            raise ValueError(f"unknown embedding variant {self.variant!r}")
        dims = self.mlp.dims
        if dims[-1] != self.attention_dim:
            raise ShapeMismatchError(
                f"MLP output dim {dims[-1]} != attention dim {self.attention_dim}"
            )
        if self.variant == GEOMETRIC_MLP:
            if self.encoding is None:
                object.__setattr__(self, "encoding", EncodingConfig())
            expected = self.encoding.out_dim + 3
            if dims[0] != expected:
                raise ShapeMismatchError(
                    f"geometric variant expects MLP input dim {expected}, got {dims[0]}"
                )
        else:
            if dims[0] != 16:
                raise ShapeMismatchError(f"flattened variant expects input dim 16, got {dims[0]}")


def init_embedding(
    variant: str = GEOMETRIC_MLP,
    seed: int = 0,
    hidden_dim: int = 64,
    attention_dim: int = 128,
    encoding: EncodingConfig | None = None,
) -> EmbeddingConfig:
    """Seeded embedding network with the default layer wiring.

    Geometric: encode(center)+direction -> hidden -> hidden -> attention
    (three linear layers, ReLU between). Flattened: 16 -> hidden ->
    attention (two linear layers, one ReLU).
    """
    if variant == GEOMETRIC_MLP:
        encoding = encoding or EncodingConfig()
        dims = [encoding.out_dim + 3, hidden_dim, hidden_dim, attention_dim]
    elif variant == FLATTENED_LINEAR:
        encoding = None
        dims = [16, hidden_dim, attention_dim]
    else:
        raise ValueError(f"unknown embedding variant {variant!r}")
    return EmbeddingConfig(
        variant=variant,
        mlp=init_mlp(dims, seed),
        encoding=encoding,
        hidden_dim=hidden_dim,
        attention_dim=attention_dim,
    )


def positional_encode(x, cfg: EncodingConfig) -> NDArray[np.float64]:
    """Fourier features of a 3-vector: [x,] sin(f_j x), cos(f_j x) per band."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (3,):
        raise ShapeMismatchError(f"expected a 3-vector, got shape {x.shape}")
    parts = [x] if cfg.include_input else []
    for j in range(cfg.num_freqs):
        fx = (cfg.freq_factor * 2.0**j) * x
        parts.append(np.sin(fx))
        parts.append(np.cos(fx))
    return np.concatenate(parts)


def embedding_input(p: Pose, cfg: EmbeddingConfig) -> NDArray[np.float64]:
    """The vector fed to the embedding MLP for pose `p`."""
    if cfg.variant == GEOMETRIC_MLP:
        return np.concatenate([positional_encode(camera_center(p), cfg.encoding), view_direction(p)])
    return p.matrix.ravel().copy()


def embed_pose_with_tape(p: Pose, cfg: EmbeddingConfig):
    """Embed one pose, returning the MLP tape for backpropagation."""
    return mlp_forward(cfg.mlp, embedding_input(p, cfg))


def embed_pose(p: Pose, cfg: EmbeddingConfig) -> NDArray[np.float64]:
    """Length-attention_dim embedding vector of a pose."""
    out, _ = embed_pose_with_tape(p, cfg)
    return out


def embed_pose_batch(poses, cfg: EmbeddingConfig) -> NDArray[np.float64]:
    """Stack per-pose embeddings into an (S, attention_dim) matrix, order kept."""
    return np.stack([embed_pose(p, cfg) for p in poses])


def embedding_backward(cfg: EmbeddingConfig, tape, output_grad):
    """Gradients of the embedding w.r.t. the MLP parameters."""
    grads, _ = mlp_backward(cfg.mlp, tape, output_grad)
    return grads
