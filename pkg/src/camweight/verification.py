"""Gradient self-checks: analytic backprop vs. central finite differences.

Three maps are checked, from the bare MLP kernel up through the full
cross-attention-to-pixel-loss pipeline on a small render. Seeds are fixed
so every ReLU pre-activation sits well away from its kink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import caw_loss_and_grads, init_caw
from .embedding import embed_pose_with_tape, embedding_backward, init_embedding
from .experiments import TrainSetup, make_training_example
from .nn import (
    flatten_grads,
    flatten_params,
    gradcheck,
    init_mlp,
    mlp_backward,
    mlp_forward,
    unflatten_params,
)

MLP_THRESHOLD = 1e-6
EMBEDDING_THRESHOLD = 1e-6
PIPELINE_THRESHOLD = 1e-4


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_rel_err: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.threshold


def min_preactivation_magnitude(tape) -> float:
    """Distance of the closest ReLU pre-activation to its kink."""
    _, preacts = tape
    return min(float(np.min(np.abs(z))) for z in preacts[:-1])


def check_mlp(seed: int = 3, corrupt: bool = False) -> GradCheckResult:
    """Random 3-layer MLP, scalarized by a fixed linear functional."""
    template = init_mlp([7, 11, 9, 5], seed=seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=7)
    v = rng.normal(size=5)

    def f(vec):
        params = unflatten_params(vec, template)
        y, tape = mlp_forward(params, x)
        grads, _ = mlp_backward(params, tape, v)
        g = flatten_grads(grads)
        if corrupt:
            g = g.copy()
            g[0] += 1.0
        return float(np.dot(v, y)), g

    x0 = flatten_params(template)
    err = gradcheck(f, x0, n_probes=x0.size, h=1e-5, seed=seed)
    return GradCheckResult("mlp_3layer", err, MLP_THRESHOLD)


def check_embedding(seed: int = 1, corrupt: bool = False) -> GradCheckResult:
    """Pose embedding (encoding + MLP), scalarized by a fixed functional."""
    from .pose import look_at

    cfg = init_embedding(seed=seed)
    pose = look_at((1.1, 2.3, 3.1), (0.0, 0.0, 0.0))
    rng = np.random.default_rng(seed + 1)
    v = rng.normal(size=cfg.attention_dim)
    template = cfg.mlp

    def f(vec):
        cfg.mlp = unflatten_params(vec, template)
        emb, tape = embed_pose_with_tape(pose, cfg)
        grads = embedding_backward(cfg, tape, v)
        g = flatten_grads(grads)
        if corrupt:
            g = g.copy()
            g[0] += 1.0
        return float(np.dot(v, emb)), g

    x0 = flatten_params(template)
    try:
        err = gradcheck(f, x0, n_probes=120, h=1e-5, seed=seed)
    finally:
        cfg.mlp = template
    return GradCheckResult("pose_embedding", err, EMBEDDING_THRESHOLD)


def pipeline_example():
    """A small, fixed training example for the end-to-end check."""
    setup = TrainSetup(
        n_sources=2,
        image_size=8,
        n_samples=16,
        volume_resolution=(16, 16, 12),
    )
    return make_training_example(scene_seed=11, setup=setup)


def check_caw_pipeline(seed: int = 2, corrupt: bool = False) -> GradCheckResult:
    """Embedding + attention + render + MSE, probed at random coordinates."""
    module = init_caw(seed=seed)
    example = pipeline_example()
    template = module.embedding.mlp

    def f(vec):
        module.embedding.mlp = unflatten_params(vec, template)
        loss, grads = caw_loss_and_grads(module, example)
        g = flatten_grads(grads)
        if corrupt:
            g = g.copy()
            g[0] += 1.0
        return loss, g

    x0 = flatten_params(template)
    try:
        err = gradcheck(f, x0, n_probes=60, h=1e-5, seed=seed)
    finally:
        module.embedding.mlp = template
    return GradCheckResult("caw_pipeline_mse", err, PIPELINE_THRESHOLD)


def run_gradient_checks(corrupt: bool = False) -> list[GradCheckResult]:
    return [
        check_mlp(corrupt=corrupt),
        check_embedding(corrupt=corrupt),
        check_caw_pipeline(corrupt=corrupt),
    ]
