"""Source-camera weighting for few-shot novel view synthesis.

Deterministic geometric weighting schemes and a trainable cross-attention
weighting, validated end-to-end on a self-contained synthetic volumetric
rendering bench.
"""

from .attention import (
    CawModule,
    RenderContext,
    TrainingExample,
    caw_loss_and_grads,
    caw_weights,
    init_caw,
    load_caw,
    save_caw,
    train_caw,
)
from .embedding import (
    EmbeddingConfig,
    EncodingConfig,
    embed_pose,
    embed_pose_batch,
    init_embedding,
    positional_encode,
)
from .errors import (
    CamWeightError,
    DegenerateLookAtError,
    DegenerateRigError,
    DegenerateRigWarning,
    DegenerateWeightsError,
    DivergedTrainingError,
    ExhaustedSamplingError,
    ImageTooSmallError,
    ShapeMismatchError,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    TrainSetup,
    make_training_set,
    read_rows_csv,
    run_one_close_view,
    run_random_views,
    run_view_sweep,
    write_rows_csv,
)
from .image_io import read_ppm, write_ppm
from .metrics import MetricReport, compare, psnr, ssim
from .nn import (
    AdamState,
    MlpParams,
    adam_step,
    gradcheck,
    init_mlp,
    mlp_backward,
    mlp_forward,
    softmax_stable,
)
from .pose import (
    CameraRig,
    Pose,
    angle_between,
    camera_center,
    center_distance,
    load_rig,
    look_at,
    pose_norm_distance,
    save_rig,
    view_direction,
)
from .renderer import (
    BenchConfig,
    FeatureVolume,
    Frustum,
    encode_source_view,
    render_ground_truth,
    render_novel_view,
    render_novel_view_with_weight_vjp,
    sample_camera,
    sample_close_view,
    sample_volume,
)
from .scene import Scene, field_query, generate_scene
from .weighting import (
    SchemeConfig,
    check_weights,
    compute_weights,
    error_weighting,
    gaussian_weighting,
    norm_weighting,
    normalize,
    uniform_weights,
    weighted_aggregate,
)

__version__ = "0.1.0"
