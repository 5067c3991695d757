"""Deterministic source-view weighting schemes and weighted latent aggregation.

Every scheme produces per-source intermediate weights and normalizes them
onto the probability simplex, generalizing plain latent averaging to a
weighted average. Weights are global per source view: the same vector is
applied at every ray point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateRigWarning, DegenerateWeightsError, ShapeMismatchError
from .pose import CameraRig, angle_between, camera_center, pose_norm_distance

SCHEMES = ("mean", "l1", "fro", "gauss", "err", "caw")

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class SchemeConfig:
    """Which weighting scheme to run and its hyperparameters.

    beta is required by (and only by) "gauss"; alpha by "err". epsilon
    stabilizes the inverse-norm and error schemes and defaults to 1e-6.
    """

    scheme: str
    beta: float | None = None
    alpha: float | None = None
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.scheme == "gauss":
            if self.beta is None or self.beta <= 0:
                raise ValueError("gauss scheme requires beta > 0")
        elif self.beta is not None:
            raise ValueError(f"beta is only valid for the gauss scheme, not {self.scheme!r}")
        if self.scheme == "err":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError("err scheme requires alpha in [0, 1]")
        elif self.alpha is not None:
            raise ValueError(f"alpha is only valid for the err scheme, not {self.scheme!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def param_label(self) -> str:
        """Short hyperparameter tag for CSV rows, e.g. "alpha=1"."""
        if self.scheme == "gauss":
            return f"beta={self.beta:g}"
        if self.scheme == "err":
            return f"alpha={self.alpha:g}"
        return ""


def normalize(intermediate: NDArray[np.float64]) -> NDArray[np.float64]:
    """Scale nonnegative intermediate weights to sum to one.

    Raises:
        DegenerateWeightsError: if every entry is zero (callers fall back
            to uniform weights).
    """
    w = np.asarray(intermediate, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ShapeMismatchError("intermediate weights must be a non-empty 1-D array")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("intermediate weights must be finite and nonnegative")
    total = float(np.sum(w))
    if total <= 0.0:
        raise DegenerateWeightsError("all intermediate weights are zero")
    return w / total


def uniform_weights(s: int) -> NDArray[np.float64]:
    """Equal weights 1/s for s sources (the plain-averaging baseline)."""
    if s < 1:
        raise ValueError("need at least one source")
    return np.full(s, 1.0 / s)


def _normalize_or_uniform(intermediate: NDArray[np.float64], why: str) -> NDArray[np.float64]:
    # Underflow at extreme hyperparameters can zero every intermediate
    # weight; uniform is the correct tie-breaking limit there.
    try:
        return normalize(intermediate)
    except DegenerateWeightsError:
        warnings.warn(f"{why}: falling back to uniform weights", DegenerateRigWarning)
        return uniform_weights(len(intermediate))


def norm_weighting(rig: CameraRig, kind: str, epsilon: float = DEFAULT_EPSILON) -> NDArray[np.float64]:
    """Inverse pose-matrix-distance weights: w'_i = 1 / (eps + Norm(P_si, P_t)).

    Args:
        kind: "l1" for entrywise L1, "fro" for Frobenius.
    """
    norms = np.array([pose_norm_distance(src, rig.target, kind) for src in rig.sources])
    return _normalize_or_uniform(1.0 / (epsilon + norms), f"{kind} weighting degenerated")


def gaussian_weighting(rig: CameraRig, beta: float) -> NDArray[np.float64]:
    """Gaussian kernel of camera-center distance: w'_i = exp(-beta * d_i^2).

    beta controls how sharply closer source cameras are preferred over
    further ones.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    ct = camera_center(rig.target)
    sq = np.array([float(np.sum((camera_center(s) - ct) ** 2)) for s in rig.sources])
    return _normalize_or_uniform(np.exp(-beta * sq), "gaussian weighting underflowed")


def error_weighting(rig: CameraRig, alpha: float, epsilon: float = DEFAULT_EPSILON) -> NDArray[np.float64]:
    """Inverse of a convex mix of view-angle and center-distance error.

    w'_i = 1 / (eps + alpha * theta_i / pi + (1 - alpha) * d_i / max_k d_k),
    where theta_i is the angle between the target's and source i's
    principal view axes. alpha = 1 uses only the angle term, alpha = 0
    only the distance term.

    If alpha < 1 and every source center coincides with the target center,
    the distance normalizer is zero; the scheme warns and returns uniform
    weights.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s = rig.num_sources
    angles = np.array([angle_between(src, rig.target) for src in rig.sources])
    ct = camera_center(rig.target)
    dists = np.array([float(np.linalg.norm(camera_center(src) - ct)) for src in rig.sources])

    err = alpha * angles / math.pi
    if alpha < 1.0:
        dmax = float(np.max(dists))
        if dmax <= 0.0:
            warnings.warn(
                "all source centers coincide with the target center; "
                "distance term is undefined, using uniform weights",
                DegenerateRigWarning,
            )
            return uniform_weights(s)
        err = err + (1.0 - alpha) * dists / dmax
    return _normalize_or_uniform(1.0 / (epsilon + err), "error weighting degenerated")


def compute_weights(rig: CameraRig, cfg: SchemeConfig, caw=None) -> NDArray[np.float64]:
    """Dispatch a rig to the configured weighting scheme.

    Args:
        caw: a trained cross-attention module; required when (and only
            when) cfg.scheme == "caw".
    """
    if cfg.scheme == "caw":
        if caw is None:
            raise ValueError("scheme 'caw' requires a cross-attention module")
        from .attention import caw_weights

        return caw_weights(caw, rig)
    if caw is not None:
        raise ValueError(f"a cross-attention module was passed to scheme {cfg.scheme!r}")
    if cfg.scheme == "mean":
        return uniform_weights(rig.num_sources)
    if cfg.scheme in ("l1", "fro"):
        return norm_weighting(rig, cfg.scheme, cfg.epsilon)
    if cfg.scheme == "gauss":
        return gaussian_weighting(rig, cfg.beta)
    if cfg.scheme == "err":
        return error_weighting(rig, cfg.alpha, cfg.epsilon)
    raise ValueError(f"unknown scheme {cfg.scheme!r}")


def weighted_aggregate(latents: NDArray[np.float64], weights: NDArray[np.float64]) -> NDArray[np.float64]:
    """Blend per-source latent columns: sum_i latents[:, i] * weights[i].

    Args:
        latents: (L, S) matrix whose columns are per-source latent vectors.
        weights: (S,) weight vector.
    """
    latents = np.asarray(latents, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if latents.ndim != 2:
        raise ShapeMismatchError(f"latents must be 2-D (L, S), got shape {latents.shape}")
    if weights.ndim != 1 or latents.shape[1] != weights.shape[0]:
        raise ShapeMismatchError(
            f"weight count {weights.shape} does not match latent columns {latents.shape}"
        )
    return latents @ weights


def check_weights(w: NDArray[np.float64], tol: float = 1e-9) -> bool:
    """True iff w is a valid weight vector (nonnegative, sums to 1 +- tol)."""
    w = np.asarray(w)
    return bool(w.ndim == 1 and w.size >= 1 and np.all(w >= 0) and abs(float(np.sum(w)) - 1.0) <= tol)
