"""gmnerkit: grounded multimodal NER tooling.

Box geometry, IoU-guarded Gaussian box jitter with a portable RNG, a strict
parser for pipe-delimited generative entity records, the span/type/box
scoring protocol with an exhaustive matching oracle, an instruction-tuning
data builder, and a Monte-Carlo perturbation sweep.  Exposed as a library,
a CLI (``gmnerkit``), and a FastAPI service.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DatasetError,
    DegenerateClipError,
    InputError,
    InvalidBoxError,
    InvariantViolation,
    OracleSizeError,
    SerializationError,
    ToolkitError,
)
from .geometry import Box, CenterSize, ImageDims, clip_to_image, iou, to_box, to_center_size
from .grbp import GrbpConfig, PerturbOutcome, perturb, perturb_dataset, perturb_example
from .records import (
    EntityRecord,
    Example,
    Generation,
    ParsedPrediction,
    load_dataset,
    load_generations,
    parse_generation,
    serialize_record,
    serialize_records,
    write_dataset,
)
from .scoring import (
    DEFAULT_ACC_THRESHOLDS,
    GROUNDING_IOU_THRESHOLD,
    MatchedPair,
    MatchOutcome,
    ScoreReport,
    TaskScore,
    match_records,
    oracle_score,
    score,
)
from .sweep import BoxSamplerSpec, SweepRow, characterize
from .databuilder import (
    BuildReport,
    InstructionTemplate,
    ReasoningProvider,
    TrainingExample,
    build_training_set,
    default_template,
    validate_training_set,
)

__all__ = [
    "__version__",
    "Box", "CenterSize", "ImageDims", "iou", "to_box", "to_center_size", "clip_to_image",
    "GrbpConfig", "PerturbOutcome", "perturb", "perturb_example", "perturb_dataset",
    "EntityRecord", "Example", "Generation", "ParsedPrediction",
    "parse_generation", "serialize_record", "serialize_records",
    "load_dataset", "write_dataset", "load_generations",
    "MatchOutcome", "MatchedPair", "TaskScore", "ScoreReport",
    "match_records", "score", "oracle_score",
    "GROUNDING_IOU_THRESHOLD", "DEFAULT_ACC_THRESHOLDS",
    "BoxSamplerSpec", "SweepRow", "characterize",
    "InstructionTemplate", "ReasoningProvider", "TrainingExample", "BuildReport",
    "build_training_set", "default_template", "validate_training_set",
    "ToolkitError", "ConfigError", "InputError", "InvalidBoxError", "DegenerateClipError",
    "SerializationError", "DatasetError", "OracleSizeError", "InvariantViolation",
]
