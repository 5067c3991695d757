"""Experiment protocols of the bench: random views, one close view, view sweep.

Each runner emits one CSV row per (scene, scheme[, view count]) with full
provenance: the per-scene seed in a row regenerates the scene, the rig and
the render jitter, so every metric is recomputable. Aggregation lives in
the reporting step, never here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .attention import CawModule, RenderContext, TrainingExample
from .metrics import psnr, ssim
from .pose import CameraRig
from .renderer import (
    BenchConfig,
    Frustum,
    encode_source_view,
    render_ground_truth,
    render_novel_view_multi,
    sample_camera,
    sample_close_view,
)
from .scene import Scene, generate_scene
from .weighting import SchemeConfig, compute_weights

CSV_HEADER = ("scene_id", "protocol", "scheme", "param", "num_sources", "seed", "psnr", "ssim")

DEFAULT_CLOSE_ANGLE = 0.17453  # 10 degrees
DEFAULT_VIEW_COUNTS = (2, 8, 16, 32)

# seed-derivation tags so every random purpose gets an independent stream
_TAG_TARGET = 1
_TAG_SOURCES = 2
_TAG_CLOSE = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the three protocols."""

    n_scenes: int = 20
    n_sources: int = 5
    seed: int = 0
    schemes: tuple[SchemeConfig, ...] = (
        SchemeConfig("mean"),
        SchemeConfig("err", alpha=1.0),
    )
    close_angle: float = DEFAULT_CLOSE_ANGLE
    view_counts: tuple[int, ...] = DEFAULT_VIEW_COUNTS
    targets_per_scene: int = 3  # view sweep only; the other protocols use 1
    bench: BenchConfig = field(default_factory=BenchConfig)

    def __post_init__(self) -> None:
        if self.n_scenes < 1 or self.n_sources < 1:
            raise ValueError("need at least one scene and one source")
        if not 0.0 < self.close_angle < math.pi:
            raise ValueError("close-view threshold must lie in (0, pi)")


@dataclass(frozen=True)
class ResultRow:
    """One measured render; see CSV_HEADER for the serialized order."""

    scene_id: int
    protocol: str
    scheme: str
    param: str
    num_sources: int
    seed: int
    psnr: float
    ssim: float


def scene_seed_for(cfg: ExperimentConfig, scene_id: int) -> int:
    """Per-scene seed; everything about a scene derives from it."""
    return cfg.seed + scene_id


def sample_protocol_cameras(protocol: str, scene_seed: int, cfg: ExperimentConfig):
    """Deterministically draw the target and source frusta for one scene.

    For "close", the first source is rejection-sampled to lie within
    cfg.close_angle of the target's view axis; the rest are unconstrained.
    """
    bench = cfg.bench
    target = sample_camera(np.random.default_rng([scene_seed, _TAG_TARGET]), bench)
    src_rng = np.random.default_rng([scene_seed, _TAG_SOURCES])
    if protocol == "close":
        close_rng = np.random.default_rng([scene_seed, _TAG_CLOSE])
        sources = [sample_close_view(target, cfg.close_angle, close_rng, bench)]
        sources += [sample_camera(src_rng, bench) for _ in range(cfg.n_sources - 1)]
    elif protocol == "random":
        sources = [sample_camera(src_rng, bench) for _ in range(cfg.n_sources)]
    else:
        raise ValueError(f"unknown simple protocol {protocol!r}")
    return target, sources


def _measure(
    scheme_cfgs,
    rig: CameraRig,
    volumes,
    target: Frustum,
    gt,
    bench: BenchConfig,
    seed: int,
    caw: CawModule | None,
):
    """Render every scheme for one (scene, target) and score against gt."""
    weight_rows = np.stack(
        [compute_weights(rig, sc, caw if sc.scheme == "caw" else None) for sc in scheme_cfgs]
    )
    size = (bench.image_size, bench.image_size)
    images = render_novel_view_multi(volumes, target, weight_rows, size, bench.n_samples, seed)
    return [(psnr(img, gt), ssim(img, gt)) for img in images]


def _run_simple(protocol: str, cfg: ExperimentConfig, caw: CawModule | None) -> list[ResultRow]:
    rows = []
    for scene_id in range(cfg.n_scenes):
        seed = scene_seed_for(cfg, scene_id)
        scene = generate_scene(seed)
        target, sources = sample_protocol_cameras(protocol, seed, cfg)
        volumes = [encode_source_view(scene, f, cfg.bench.volume_resolution) for f in sources]
        rig = CameraRig(target.pose, tuple(f.pose for f in sources))
        size = (cfg.bench.image_size, cfg.bench.image_size)
        gt = render_ground_truth(scene, target, size, cfg.bench.n_samples, seed)
        scores = _measure(cfg.schemes, rig, volumes, target, gt, cfg.bench, seed, caw)
        for sc, (p, s) in zip(cfg.schemes, scores):
            rows.append(
                ResultRow(scene_id, protocol, sc.scheme, sc.param_label(), cfg.n_sources, seed, p, s)
            )
    return sort_rows(rows)


def run_random_views(cfg: ExperimentConfig, caw: CawModule | None = None) -> list[ResultRow]:
    """Unconstrained sources and target, one row per scene and scheme."""
    return _run_simple("random", cfg, caw)


def run_one_close_view(cfg: ExperimentConfig, caw: CawModule | None = None) -> list[ResultRow]:
    """Same, but one source is guaranteed within cfg.close_angle of the target."""
    return _run_simple("close", cfg, caw)


def run_view_sweep(cfg: ExperimentConfig, caw: CawModule | None = None) -> list[ResultRow]:
    """Metrics as the source count grows through cfg.view_counts.

    The largest count's sources are drawn once per scene and each sweep
    point uses the leading subset, so growing S genuinely adds views.
    Rows average cfg.targets_per_scene target views per scene.
    """
    counts = tuple(cfg.view_counts)
    if not counts or min(counts) < 1:
        raise ValueError("view counts must be positive")
    s_max = max(counts)
    rows = []
    for scene_id in range(cfg.n_scenes):
        seed = scene_seed_for(cfg, scene_id)
        scene = generate_scene(seed)
        tgt_rng = np.random.default_rng([seed, _TAG_TARGET])
        targets = [sample_camera(tgt_rng, cfg.bench) for _ in range(cfg.targets_per_scene)]
        src_rng = np.random.default_rng([seed, _TAG_SOURCES])
        sources = [sample_camera(src_rng, cfg.bench) for _ in range(s_max)]
        volumes_all = [encode_source_view(scene, f, cfg.bench.volume_resolution) for f in sources]
        size = (cfg.bench.image_size, cfg.bench.image_size)
        gts = [render_ground_truth(scene, t, size, cfg.bench.n_samples, seed) for t in targets]

        for s in counts:
            volumes = volumes_all[:s]
            per_scheme = np.zeros((len(cfg.schemes), 2))
            for target, gt in zip(targets, gts):
                rig = CameraRig(target.pose, tuple(f.pose for f in sources[:s]))
                scores = _measure(cfg.schemes, rig, volumes, target, gt, cfg.bench, seed, caw)
                per_scheme += np.asarray(scores)
            per_scheme /= len(targets)
            for sc, (p, ss) in zip(cfg.schemes, per_scheme):
                rows.append(
                    ResultRow(scene_id, "sweep", sc.scheme, sc.param_label(), s, seed, float(p), float(ss))
                )
    return sort_rows(rows)


def sort_rows(rows: list[ResultRow]) -> list[ResultRow]:
    """Fixed row order regardless of completion order."""
    return sorted(rows, key=lambda r: (r.scene_id, r.scheme, r.param, r.num_sources))


def _format_metric(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


def write_rows_csv(path, rows: list[ResultRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r.scene_id,
                    r.protocol,
                    r.scheme,
                    r.param,
                    r.num_sources,
                    r.seed,
                    _format_metric(r.psnr),
                    _format_metric(r.ssim),
                ]
            )


def read_rows_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        for rec in reader:
            rows.append(
                ResultRow(
                    scene_id=int(rec[0]),
                    protocol=rec[1],
                    scheme=rec[2],
                    param=rec[3],
                    num_sources=int(rec[4]),
                    seed=int(rec[5]),
                    psnr=float(rec[6]),
                    ssim=float(rec[7]),
                )
            )
    return rows


@dataclass(frozen=True)
class TrainSetup:
    """How training examples are rendered; smaller than the eval bench."""

    n_sources: int = 5
    image_size: int = 16
    n_samples: int = 32
    volume_resolution: tuple[int, int, int] = (24, 24, 16)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def render_bench(self) -> BenchConfig:
        return replace(
            self.bench,
            image_size=self.image_size,
            n_samples=self.n_samples,
            volume_resolution=self.volume_resolution,
        )


def make_training_example(scene_seed: int, setup: TrainSetup, rig_index: int = 0) -> TrainingExample:
    """One supervised example: a random rig of a scene plus its target render."""
    bench = setup.render_bench()
    scene = generate_scene(scene_seed)
    target = sample_camera(np.random.default_rng([scene_seed, _TAG_TARGET, rig_index]), bench)
    src_rng = np.random.default_rng([scene_seed, _TAG_SOURCES, rig_index])
    sources = [sample_camera(src_rng, bench) for _ in range(setup.n_sources)]
    volumes = [encode_source_view(scene, f, bench.volume_resolution) for f in sources]
    size = (bench.image_size, bench.image_size)
    render_seed = scene_seed + 7919 * rig_index
    gt = render_ground_truth(scene, target, size, bench.n_samples, render_seed)
    rig = CameraRig(target.pose, tuple(f.pose for f in sources))
    ctx = RenderContext(volumes, target, size, bench.n_samples, render_seed)
    return TrainingExample(rig=rig, context=ctx, target_image=gt)


def make_training_set(
    base_seed: int,
    n_scenes: int,
    setup: TrainSetup,
    rigs_per_scene: int = 8,
) -> list[TrainingExample]:
    """Training examples over n_scenes scenes, several distinct rigs each.

    Rig diversity per scene is what lets the module learn the geometric
    trend rather than memorizing scene-specific detail.
    """
    return [
        make_training_example(base_seed + i, setup, rig_index=j)
        for i in range(n_scenes)
        for j in range(rigs_per_scene)
    ]
