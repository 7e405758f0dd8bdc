"""refshield: in-loop reference-based content filtering for ODE samplers."""

__version__ = "0.1.0"

from .encoders import (
    DecoderKind,
    DecoderSpec,
    Embedding,
    EncoderKind,
    EncoderSpec,
    decode,
    encode,
)
from .evaluation import (
    CurveSummary,
    EvalSample,
    ScalabilityRecord,
    curve_summary,
    pr_auc,
    roc_auc,
    run_ablation,
    run_scalability,
    threshold_sweep,
)
from .filtering import (
    Decision,
    FilterConfig,
    FilterMode,
    LatencyLedger,
    RunResult,
    Verdict,
    build_suite_index,
    run_filtered,
    run_unfiltered_then_check,
)
from .index import (
    ReferenceIndex,
    SimilarityReport,
    build_index,
    load_index,
    save_index,
    score,
)
from .sampler import (
    BenchmarkSuite,
    OracleKind,
    ScenarioSpec,
    Trajectory,
    VelocityOracle,
    euler_step,
    load_suite,
    make_benchmark_suite,
    run_trajectory,
    save_suite,
)
from .schedule import (
    LatentState,
    Prediction,
    PredictionKind,
    Schedule,
    ScheduleKind,
    interpolate,
    true_velocity,
    x_pred,
)
