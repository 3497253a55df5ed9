"""codedcam: coded-aperture camera simulation, depth from defocus, and RGB-D
visual odometry with trajectory evaluation."""

__version__ = "0.1.0"

from .optics import (
    CameraConfig,
    PhaseMask,
    ApertureAmplitude,
    Psf,
    PsfBank,
    zernike_eval,
    height_from_zernike,
    phase_from_height,
    defocus_phase,
    simulate_psf,
    build_psf_bank,
)
from .render import (
    DepthBins,
    Intrinsics,
    SceneFrame,
    LayerDecomposition,
    CodedFrame,
    make_depth_bins,
    quantize_depth,
    render_coded,
    add_sensor_noise,
)
from .depth import (
    DepthEstimate,
    DepthMetrics,
    LossWeights,
    wiener_deconvolve,
    depth_cost_volume,
    classify_depth,
    compute_depth_metrics,
    l1_loss,
    depth_weighted_loss,
)
from .features import Keypoint, detect_features, match_features
from .vo import (
    Pose,
    Trajectory,
    VoConfig,
    unsharp_mask,
    backproject,
    estimate_relative_pose,
    run_odometry,
)
from .evaluate import (
    AlignmentResult,
    AblationSpec,
    associate,
    rigid_align_no_scale,
    compute_ate,
    run_ablation,
)
from .configio import PipelineConfig, parse_config
from .dataset import DatasetIndex, load_dataset
