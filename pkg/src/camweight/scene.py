"""Analytic volumetric test scenes: colored Gaussian density blobs.

A scene is a handful of soft blobs inside a unit-scale bounding sphere.
The field is queried directly by the ground-truth renderer and voxelized
by the source-view encoder, so no learned model is needed anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class Primitive:
    """One isotropic Gaussian density blob."""

    center: NDArray[np.float64]
    radius: float
    color: NDArray[np.float64]
    peak_density: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))
        if self.radius <= 0 or self.peak_density < 0:
            raise ValueError("primitive needs radius > 0 and peak_density >= 0")


@dataclass(frozen=True)
class Scene:
    """A seeded collection of blobs inside a bounding sphere."""

    seed: int
    primitives: tuple[Primitive, ...]
    bounding_radius: float = 1.0

    def __post_init__(self) -> None:
        if len(self.primitives) < 1:
            raise ValueError("scene needs at least one primitive")
        for prim in self.primitives:
            if np.linalg.norm(prim.center) > self.bounding_radius:
                raise ValueError("primitive center outside the bounding radius")


def generate_scene(
    seed: int,
    count_range: tuple[int, int] = (3, 6),
    bounding_radius: float = 1.0,
) -> Scene:
    """Deterministically sample a scene from a seed.

    Blobs are opaque enough that a straight path through one is mostly
    absorbed, which is what makes far-side views genuinely uninformative.
    When two or more blobs are drawn, the first two are forced apart in
    both position and color so that no generated scene is symmetric and
    the viewing direction always matters.
    """
    lo, hi = count_range
    if lo < 1 or hi < lo:
        raise ValueError("count range must satisfy 1 <= lo <= hi")
    rng = np.random.default_rng([int(seed), 0x5CE7E])
    count = int(rng.integers(lo, hi + 1))

    centers = []
    colors = []
    for idx in range(count):
        while True:
            c = rng.uniform(-0.7, 0.7, size=3)
            col = rng.uniform(0.1, 0.95, size=3)
            if idx == 1:
                # keep the first pair visibly distinct
                if np.linalg.norm(c - centers[0]) < 0.5:
                    continue
                if np.linalg.norm(col - colors[0]) < 0.4:
                    continue
            if np.linalg.norm(c) > 0.75:
                continue
            break
        centers.append(c)
        colors.append(col)

    prims = []
    for c, col in zip(centers, colors):
        radius = float(rng.uniform(0.25, 0.45))
        peak = float(rng.uniform(8.0, 18.0))
        prims.append(Primitive(center=c, radius=radius, color=col, peak_density=peak))
    return Scene(seed=int(seed), primitives=tuple(prims), bounding_radius=bounding_radius)


def field_query_batch(scene: Scene, points: NDArray[np.float64]):
    """Density and color of the analytic field at many points.

    Density is the sum of blob Gaussians peak * exp(-d^2 / (2 s^2)) with
    s = radius / 2; color is the density-weighted average of blob colors
    and black where the total density vanishes.

    Args:
        points: (P, 3) array.

    Returns:
        (density (P,), color (P, 3)).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (P, 3), got {pts.shape}")
    density = np.zeros(pts.shape[0])
    color_acc = np.zeros((pts.shape[0], 3))
    for prim in scene.primitives:
        sigma = prim.radius / 2.0
        d2 = np.sum((pts - prim.center) ** 2, axis=1)
        dens = prim.peak_density * np.exp(-d2 / (2.0 * sigma * sigma))
        density += dens
        color_acc += dens[:, None] * prim.color
    color = np.zeros_like(color_acc)
    np.divide(color_acc, density[:, None], out=color, where=density[:, None] > 0.0)
    return density, color


def field_query(scene: Scene, point) -> tuple[float, NDArray[np.float64]]:
    """Single-point (density, color) sample of the field."""
    dens, col = field_query_batch(scene, np.asarray(point, dtype=np.float64)[None, :])
    return float(dens[0]), col[0]
