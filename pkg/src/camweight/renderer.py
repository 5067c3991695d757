"""Frustum feature volumes and the weighted volume renderer.

The bench mirrors the structure of frustum-volume NVS pipelines at toy
scale: each source view is voxelized into a camera-aligned truncated
pyramid of 4-channel latents (RGB + density) with a visibility mask, a
target ray point gathers one latent per source by trilinear interpolation,
the latents are blended with per-view weights, decoded analytically, and
composited by emission-absorption ray marching.

Blending is linear in the weight vector before the decoder, so the
gradient of a rendered image with respect to the weights is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numpy.typing import NDArray

from .errors import ExhaustedSamplingError, ShapeMismatchError
from .pose import Pose, angle_between, look_at
from .scene import Scene, field_query_batch

DECODER_EPS = 1e-6
TRUNCATION_TRANSMITTANCE = 0.05


@dataclass(frozen=True)
class Frustum:
    """A camera pose plus the viewing pyramid it observes."""

    pose: Pose
    fov: float
    aspect: float = 1.0
    z_near: float = 2.0
    z_far: float = 6.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if not 0.0 < self.z_near < self.z_far:
            raise ValueError("need 0 < z_near < z_far")

    @property
    def tan_half(self) -> float:
        return math.tan(self.fov / 2.0)

    @property
    def half_width(self) -> float:
        return self.tan_half * self.aspect


@dataclass(frozen=True)
class BenchConfig:
    """Default geometry of the synthetic bench; everything is overridable."""

    fov: float = 0.6
    aspect: float = 1.0
    z_near: float = 2.0
    z_far: float = 6.0
    radius_range: tuple[float, float] = (4.0, 4.0)
    volume_resolution: tuple[int, int, int] = (48, 48, 32)
    image_size: int = 64
    n_samples: int = 64

    def frustum(self, pose: Pose) -> Frustum:
        return Frustum(pose, self.fov, self.aspect, self.z_near, self.z_far)


@dataclass
class FeatureVolume:
    """Voxelized latents of one source view.

    Attributes:
        frustum: the source camera's viewing pyramid.
        resolution: (nx, ny, nz) cell counts across image x, image y and
            depth (uniform in depth between z_near and z_far).
        latents: (ny, nx, nz, 4) float64 grid, channels RGB + density;
            cells hidden behind opaque content hold zeros.
        validity: (ny, nx, nz) float64 mask, 1 where the source camera
            actually observes the cell and 0 behind occluders.
    """

    frustum: Frustum
    resolution: tuple[int, int, int]
    latents: NDArray[np.float64]
    validity: NDArray[np.float64]

    def __post_init__(self) -> None:
        nx, ny, nz = self.resolution
        if self.latents.shape != (ny, nx, nz, 4) or self.validity.shape != (ny, nx, nz):
            raise ShapeMismatchError("latent grid shape does not match resolution")
        self._grid: NDArray[np.float64] | None = None

    def sampling_grid(self) -> NDArray[np.float64]:
        """Latents and validity as one contiguous (ny, nx, nz, 5) array."""
        if self._grid is None:
            self._grid = np.ascontiguousarray(
                np.concatenate([self.latents, self.validity[..., None]], axis=-1)
            )
        return self._grid


def _grid_axes(frustum: Frustum, resolution: tuple[int, int, int]):
    """Per-axis cell-center coordinates: image-plane ndc and depth."""
    nx, ny, nz = resolution
    x_ndc = ((np.arange(nx) + 0.5) / nx * 2.0 - 1.0) * frustum.half_width
    y_ndc = (1.0 - (np.arange(ny) + 0.5) / ny * 2.0) * frustum.tan_half
    depth = frustum.z_near + (np.arange(nz) + 0.5) * (frustum.z_far - frustum.z_near) / nz
    return x_ndc, y_ndc, depth


def cell_center_world(vol: FeatureVolume, ix: int, iy: int, iz: int) -> NDArray[np.float64]:
    """World position of the center of grid cell (ix, iy, iz)."""
    x_ndc, y_ndc, depth = _grid_axes(vol.frustum, vol.resolution)
    t = depth[iz]
    cam = np.array([x_ndc[ix] * t, y_ndc[iy] * t, -t])
    m = vol.frustum.pose.matrix
    return m[:3, :3] @ cam + m[:3, 3]


def encode_source_view(scene: Scene, frustum: Frustum, resolution: tuple[int, int, int]) -> FeatureVolume:
    """Voxelize the analytic field as seen from one source camera.

    Each cell center is point-sampled for color and density. Marching each
    pixel ray front to back, once the accumulated transmittance drops
    below 0.05 every deeper cell is invalidated and zeroed: a real camera
    never observes what is hidden behind the first opaque surface.
    """
    nx, ny, nz = resolution
    x_ndc, y_ndc, depth = _grid_axes(frustum, resolution)

    # cam-space cell centers, shape (ny, nx, nz, 3)
    xs = x_ndc[None, :, None] * depth[None, None, :]
    ys = y_ndc[:, None, None] * depth[None, None, :]
    cam = np.empty((ny, nx, nz, 3))
    cam[..., 0] = xs
    cam[..., 1] = ys
    cam[..., 2] = -depth[None, None, :]

    m = frustum.pose.matrix
    world = cam.reshape(-1, 3) @ m[:3, :3].T + m[:3, 3]
    density, color = field_query_batch(scene, world)
    density = density.reshape(ny, nx, nz)
    color = color.reshape(ny, nx, nz, 3)

    # per-pixel-ray segment length of one depth slice, in world units
    dir_scale = np.sqrt(x_ndc[None, :] ** 2 + y_ndc[:, None] ** 2 + 1.0)
    delta = (frustum.z_far - frustum.z_near) / nz * dir_scale

    optical = np.cumsum(density * delta[..., None], axis=-1)
    trans_entering = np.ones((ny, nx, nz))
    trans_entering[..., 1:] = np.exp(-optical[..., :-1])
    validity = (trans_entering >= TRUNCATION_TRANSMITTANCE).astype(np.float64)

    latents = np.concatenate([color, density[..., None]], axis=-1)
    latents *= validity[..., None]
    return FeatureVolume(frustum=frustum, resolution=resolution, latents=latents, validity=validity)


@numba.njit(cache=True)
def _trilinear_kernel(grid, gx, gy, gz, inside, out):
    """Gather-and-blend loop; IEEE float64 semantics, no fastmath."""
    ny, nx, nz, nc = grid.shape
    for p in range(gx.shape[0]):
        if not inside[p]:
            for c in range(nc):
                out[p, c] = 0.0
            continue
        x0 = int(np.floor(gx[p]))
        y0 = int(np.floor(gy[p]))
        z0 = int(np.floor(gz[p]))
        x1 = min(x0 + 1, nx - 1)
        y1 = min(y0 + 1, ny - 1)
        z1 = min(z0 + 1, nz - 1)
        fx = gx[p] - x0
        fy = gy[p] - y0
        fz = gz[p] - z0
        for c in range(nc):
            c00 = grid[y0, x0, z0, c] * (1 - fz) + grid[y0, x0, z1, c] * fz
            c01 = grid[y0, x1, z0, c] * (1 - fz) + grid[y0, x1, z1, c] * fz
            c10 = grid[y1, x0, z0, c] * (1 - fz) + grid[y1, x0, z1, c] * fz
            c11 = grid[y1, x1, z0, c] * (1 - fz) + grid[y1, x1, z1, c] * fz
            c0 = c00 * (1 - fx) + c01 * fx
            c1 = c10 * (1 - fx) + c11 * fx
            out[p, c] = c0 * (1 - fy) + c1 * fy


def _sample_volume_batch(vol: FeatureVolume, points: NDArray[np.float64]):
    """Trilinear latent and validity lookup for (P, 3) world points.

    Points outside the frustum return zero latents and validity zero;
    inside, coordinates are clamped to the span of cell centers.
    """
    nx, ny, nz = vol.resolution
    fr = vol.frustum
    m = fr.pose.matrix
    cam = (points - m[:3, 3]) @ m[:3, :3]
    depth = -cam[:, 2]

    safe = np.where(depth > 1e-12, depth, 1.0)
    xn = cam[:, 0] / safe
    yn = cam[:, 1] / safe
    inside = (
        (depth >= fr.z_near)
        & (depth <= fr.z_far)
        & (np.abs(xn) <= fr.half_width)
        & (np.abs(yn) <= fr.tan_half)
    )

    gx = np.clip((xn / fr.half_width + 1.0) * 0.5 * nx - 0.5, 0.0, nx - 1.0)
    gy = np.clip((1.0 - yn / fr.tan_half) * 0.5 * ny - 0.5, 0.0, ny - 1.0)
    gz = np.clip((depth - fr.z_near) / (fr.z_far - fr.z_near) * nz - 0.5, 0.0, nz - 1.0)

    out = np.empty((points.shape[0], 5))
    _trilinear_kernel(vol.sampling_grid(), gx, gy, gz, inside, out)
    return out[:, :4], out[:, 4]


def sample_volume(vol: FeatureVolume, point) -> tuple[NDArray[np.float64], float]:
    """Latent (length 4) and validity weight in [0, 1] at one world point."""
    lat, val = _sample_volume_batch(vol, np.asarray(point, dtype=np.float64)[None, :])
    return lat[0], float(val[0])


def _rays(frustum: Frustum, width: int, height: int):
    """Per-pixel world ray directions scaled to unit camera depth.

    Returns (origin (3,), dirs (H, W, 3), dir_scale (H, W)); a point at
    camera depth t along pixel (j, i) is origin + t * dirs[j, i], and the
    world-space length of one unit of depth is dir_scale[j, i].
    """
    x_ndc = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * frustum.half_width
    y_ndc = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * frustum.tan_half
    d_cam = np.empty((height, width, 3))
    d_cam[..., 0] = x_ndc[None, :]
    d_cam[..., 1] = y_ndc[:, None]
    d_cam[..., 2] = -1.0
    m = frustum.pose.matrix
    dirs = d_cam @ m[:3, :3].T
    dir_scale = np.sqrt(x_ndc[None, :] ** 2 + y_ndc[:, None] ** 2 + 1.0)
    return m[:3, 3].copy(), dirs, dir_scale


def _stratified_depths(frustum: Frustum, width: int, height: int, n_samples: int, seed: int):
    """Jittered depth samples: one uniform offset per ray, shared by all bins."""
    rng = np.random.default_rng([int(seed), 0x57A7])
    jitter = rng.random((height, width))
    step = (frustum.z_far - frustum.z_near) / n_samples
    k = np.arange(n_samples)
    return frustum.z_near + (k[None, None, :] + jitter[..., None]) * step, step


def _composite(rgb: NDArray[np.float64], sigma: NDArray[np.float64], delta: NDArray[np.float64]):
    """Front-to-back emission-absorption compositing along the last axis.

    Args:
        rgb: (..., N, 3) point colors.
        sigma: (..., N) nonnegative densities.
        delta: (...,) world-space segment length per sample.

    Returns:
        (pixels (..., 3) clamped to [0, 1], per-sample transmittance T,
        alpha). Background is black.
    """
    alpha = 1.0 - np.exp(-sigma * delta[..., None])
    beta = 1.0 - alpha
    trans = np.ones_like(alpha)
    trans[..., 1:] = np.cumprod(beta[..., :-1], axis=-1)
    raw = np.sum((trans * alpha)[..., None] * rgb, axis=-2)
    return np.clip(raw, 0.0, 1.0), trans, alpha, raw


def render_ground_truth(
    scene: Scene,
    frustum: Frustum,
    resolution: tuple[int, int],
    n_samples: int = 64,
    seed: int = 0,
) -> NDArray[np.float64]:
    """Reference image: ray-march the analytic field itself.

    Args:
        resolution: (width, height).

    Returns:
        (height, width, 3) image in [0, 1] on a black background.
    """
    width, height = resolution
    origin, dirs, dir_scale = _rays(frustum, width, height)
    depths, step = _stratified_depths(frustum, width, height, n_samples, seed)
    pts = origin + depths[..., None] * dirs[:, :, None, :]
    density, color = field_query_batch(scene, pts.reshape(-1, 3))
    sigma = density.reshape(height, width, n_samples)
    rgb = color.reshape(height, width, n_samples, 3)
    img, _, _, _ = _composite(rgb, sigma, step * dir_scale)
    return img


def _decode(acc_lat: NDArray[np.float64], acc_val: NDArray[np.float64]):
    """Analytic decoder from aggregated latents to (color, density).

    Color is renormalized by the aggregated validity so partially covered
    points keep their hue; density stays validity-scaled, so weight spent
    on views that cannot see a point genuinely thins it out.
    """
    m_safe = np.maximum(acc_val, DECODER_EPS)
    color = np.clip(acc_lat[:, :3] / m_safe[:, None], 0.0, 1.0)
    sigma = np.maximum(acc_lat[:, 3], 0.0)
    return color, sigma


def render_novel_view_multi(
    volumes: list[FeatureVolume],
    target: Frustum,
    weight_rows: NDArray[np.float64],
    resolution: tuple[int, int],
    n_samples: int = 64,
    seed: int = 0,
) -> list[NDArray[np.float64]]:
    """Render the same target once per weight vector, sampling sources once.

    Args:
        weight_rows: (K, S) array, one weight vector per row.

    Returns:
        K images (height, width, 3); bit-identical to K separate
        render_novel_view calls with the same seed.
    """
    weight_rows = np.atleast_2d(np.asarray(weight_rows, dtype=np.float64))
    n_views = len(volumes)
    if weight_rows.shape[1] != n_views:
        raise ShapeMismatchError(
            f"{weight_rows.shape[1]} weights per row but {n_views} volumes"
        )
    width, height = resolution
    origin, dirs, dir_scale = _rays(target, width, height)
    depths, step = _stratified_depths(target, width, height, n_samples, seed)
    pts = (origin + depths[..., None] * dirs[:, :, None, :]).reshape(-1, 3)

    n_pts = pts.shape[0]
    acc_lat = np.zeros((weight_rows.shape[0], n_pts, 4))
    acc_val = np.zeros((weight_rows.shape[0], n_pts))
    for i, vol in enumerate(volumes):
        lat, val = _sample_volume_batch(vol, pts)
        for k in range(weight_rows.shape[0]):
            acc_lat[k] += weight_rows[k, i] * lat
            acc_val[k] += weight_rows[k, i] * val

    images = []
    for k in range(weight_rows.shape[0]):
        color, sigma = _decode(acc_lat[k], acc_val[k])
        rgb = color.reshape(height, width, n_samples, 3)
        sig = sigma.reshape(height, width, n_samples)
        img, _, _, _ = _composite(rgb, sig, step * dir_scale)
        images.append(img)
    return images


def render_novel_view(
    volumes: list[FeatureVolume],
    target: Frustum,
    weights: NDArray[np.float64],
    resolution: tuple[int, int],
    n_samples: int = 64,
    seed: int = 0,
) -> NDArray[np.float64]:
    """Weighted-aggregation render of a novel view from source volumes."""
    return render_novel_view_multi(volumes, target, weights, resolution, n_samples, seed)[0]


def render_novel_view_with_weight_vjp(
    volumes: list[FeatureVolume],
    target: Frustum,
    weights: NDArray[np.float64],
    resolution: tuple[int, int],
    n_samples: int = 64,
    seed: int = 0,
):
    """Render and return an exact adjoint for the per-view weights.

    Keeps per-source samples in memory, so it is intended for the small
    renders used during cross-attention training.

    Returns:
        (image, vjp) where vjp maps an upstream gradient with the image's
        shape to the gradient with respect to the weight vector.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n_views = len(volumes)
    if weights.shape != (n_views,):
        raise ShapeMismatchError(f"weights shape {weights.shape} != ({n_views},)")
    width, height = resolution
    origin, dirs, dir_scale = _rays(target, width, height)
    depths, step = _stratified_depths(target, width, height, n_samples, seed)
    pts = (origin + depths[..., None] * dirs[:, :, None, :]).reshape(-1, 3)
    n_pts = pts.shape[0]

    lats = np.empty((n_views, n_pts, 4))
    vals = np.empty((n_views, n_pts))
    acc_lat = np.zeros((n_pts, 4))
    acc_val = np.zeros(n_pts)
    for i, vol in enumerate(volumes):
        lats[i], vals[i] = _sample_volume_batch(vol, pts)
        acc_lat += weights[i] * lats[i]
        acc_val += weights[i] * vals[i]

    m_safe = np.maximum(acc_val, DECODER_EPS)
    u = acc_lat[:, :3] / m_safe[:, None]
    color = np.clip(u, 0.0, 1.0)
    sigma = np.maximum(acc_lat[:, 3], 0.0)

    rgb = color.reshape(height, width, n_samples, 3)
    sig = sigma.reshape(height, width, n_samples)
    delta = step * dir_scale
    image, trans, alpha, raw = _composite(rgb, sig, delta)

    def vjp(upstream: NDArray[np.float64]) -> NDArray[np.float64]:
        g = np.asarray(upstream, dtype=np.float64)
        if g.shape != (height, width, 3):
            raise ShapeMismatchError(f"upstream shape {g.shape} != {(height, width, 3)}")
        g = g * ((raw > 0.0) & (raw < 1.0))

        ta = trans * alpha
        # dL/dc_k and dL/dsigma_k of the compositing step
        d_color = ta[..., None] * g[:, :, None, :]
        cg = np.sum(rgb * g[:, :, None, :], axis=-1)
        ta_cg = ta * cg
        suffix = np.zeros_like(ta_cg)
        suffix[..., :-1] = np.cumsum(ta_cg[..., ::-1], axis=-1)[..., ::-1][..., 1:]
        d_sigma = delta[..., None] * (trans * (1.0 - alpha) * cg - suffix)

        d_color = d_color.reshape(n_pts, 3)
        d_sigma = d_sigma.reshape(n_pts)
        # decoder adjoints; clamps contribute zero where active
        d_color = d_color * ((u > 0.0) & (u < 1.0))
        d_sigma = d_sigma * (acc_lat[:, 3] > 0.0)

        inv = 1.0 / m_safe
        val_branch = (acc_val > DECODER_EPS).astype(np.float64)
        grad_w = np.empty(n_views)
        for i in range(n_views):
            du_dw = inv[:, None] * (lats[i, :, :3] - u * (vals[i] * val_branch)[:, None])
            grad_w[i] = float(np.sum(d_color * du_dw) + np.sum(d_sigma * lats[i, :, 3]))
        return grad_w

    return image, vjp


def sample_camera(rng, bench: BenchConfig, radius_range: tuple[float, float] | None = None) -> Frustum:
    """Random camera on a sphere looking at the origin.

    Directions are uniform on the sphere (poles near the up axis are
    rejected so the look-at roll stays defined); the radius is uniform in
    `radius_range`.

    Args:
        rng: an int seed or a numpy Generator.
    """
    rng = np.random.default_rng(rng)
    lo, hi = radius_range if radius_range is not None else bench.radius_range
    while True:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            continue
        direction = v / norm
        if abs(direction[1]) > 0.999:
            continue
        break
    radius = float(rng.uniform(lo, hi))
    pose = look_at(radius * direction, (0.0, 0.0, 0.0))
    return bench.frustum(pose)


def sample_close_view(
    target: Frustum,
    max_angle: float,
    rng,
    bench: BenchConfig,
    radius_range: tuple[float, float] | None = None,
    max_attempts: int = 10000,
) -> Frustum:
    """Rejection-sample a camera whose view axis is within max_angle of the target's."""
    if not 0.0 < max_angle < math.pi:
        raise ValueError("max_angle must lie in (0, pi)")
    rng = np.random.default_rng(rng)
    for _ in range(max_attempts):
        cand = sample_camera(rng, bench, radius_range)
        if angle_between(cand.pose, target.pose) < max_angle:
            return cand
    raise ExhaustedSamplingError(
        f"no view within {max_angle:.4f} rad of the target after {max_attempts} attempts"
    )
