"""Human-following simulation: synthetic perception, SORT-style tracking,
dual-part re-identification, dual-camera control, and an ablation harness."""

from .control import (
    CameraSwitchConfig,
    FollowPipeline,
    FollowState,
    PlannerConfig,
    SearchConfig,
    ServoConfig,
    goal_from_depth,
    safer_filter,
    select_camera,
    visual_servo,
)
from .harness import (
    MetricsSummary,
    ScenarioSpec,
    TrialResult,
    VARIANT_PRESETS,
    VariantConfig,
    compute_metrics,
    default_scenario,
    run_registration,
    run_suite,
    run_trial,
)
from .reid import (
    FeatureBank,
    RegistrationConfig,
    RegistrationError,
    ReidConfig,
    SimilarityReport,
    bank_mean,
    cosine_similarity,
    register_target,
    reidentify,
    score_person,
)
from .sensing import (
    BoundingBox,
    CameraModel,
    Detection,
    Embedding,
    IdentityProfile,
    SensorNoise,
    iou,
    match_faces_to_bodies,
    pose_boxes,
    render_detections,
    synth_embedding,
    synth_face,
)
from .tracking import (
    KalmanState,
    Track,
    Tracker,
    TrackerConfig,
    associate,
    kf_predict,
    kf_update,
)
from .world import (
    AgentState,
    ConfigError,
    ControlCommand,
    LidarScan,
    Obstacle,
    PersonState,
    World,
    WorldConfig,
)

__version__ = "0.1.0"
