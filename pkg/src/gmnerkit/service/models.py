"""Pydantic request/response models mirroring the file formats."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

BoxTuple = tuple[float, float, float, float]

CoordFrame = Literal["absolute", "normalized-1000"]


class RecordModel(BaseModel):
    span: str
    type: str
    box: BoxTuple | None = None


class ExampleModel(BaseModel):
    id: str
    text: str
    image_path: str
    image_width: int
    image_height: int
    entities: list[RecordModel] = Field(default_factory=list)
    reasoning: str | None = None


class GenerationModel(BaseModel):
    id: str
    output: str


class GrbpParams(BaseModel):
    beta: float = 0.03
    gamma: float = 0.03
    tau: float = 0.7
    max_tries: int = 10
    min_size: float = 4.0
    s_min: float = 0.8
    s_max: float = 1.2


class MalformedLine(BaseModel):
    line: str
    reason: str


class ParseRequest(BaseModel):
    id: str = "adhoc"
    output: str
    coord_frame: CoordFrame = "absolute"
    image_width: int | None = None
    image_height: int | None = None


class ParseResponse(BaseModel):
    id: str
    reasoning: str
    records: list[RecordModel]
    malformed_lines: list[MalformedLine]


class ScoreRequest(BaseModel):
    golds: list[ExampleModel]
    generations: list[GenerationModel]
    thresholds: list[float] = [0.5, 0.75]
    coord_frame: CoordFrame = "absolute"
    use_oracle: bool = False


class TaskScoreModel(BaseModel):
    n_correct: int
    n_pred: int
    n_gold: int
    precision: float
    recall: float
    f1: float


class ScoreDiagnostics(BaseModel):
    n_generations: int
    n_unknown_ids: int
    n_missing_predictions: int
    n_malformed_lines: int


class ScoreResponse(BaseModel):
    mner: TaskScoreModel
    eeg: TaskScoreModel
    gmner: TaskScoreModel
    acc_at: dict[str, float]
    mean_iou: float
    n_gold_with_box: int
    diagnostics: ScoreDiagnostics


class PerturbRequest(BaseModel):
    examples: list[ExampleModel]
    grbp: GrbpParams = Field(default_factory=GrbpParams)
    seed: int = 0


class PerturbResponse(BaseModel):
    examples: list[ExampleModel]
    n_boxes: int
    n_fallbacks: int


class TraceModel(BaseModel):
    id: str
    reasoning: str


class BuildRequest(BaseModel):
    examples: list[ExampleModel]
    traces: list[TraceModel] = Field(default_factory=list)
    template_body: str | None = None
    grbp: GrbpParams = Field(default_factory=GrbpParams)
    seed: int = 0
    use_cot: bool = True


class TrainingExampleModel(BaseModel):
    id: str
    instruction: str
    image_path: str
    input_text: str
    target: str


class SkippedModel(BaseModel):
    id: str
    reason: str


class BuildResponse(BaseModel):
    training_examples: list[TrainingExampleModel]
    skipped: list[SkippedModel]
    counts: dict[str, int]


class SamplerModel(BaseModel):
    width: int = 640
    height: int = 480
    min_size: float = 8.0
    max_frac: float = 0.5


class SweepRequest(BaseModel):
    grid: list[float]
    tau: float = 0.7
    n_samples: int = 10000
    seed: int = 0
    sampler: SamplerModel = Field(default_factory=SamplerModel)
    grbp: GrbpParams = Field(default_factory=GrbpParams)


class SweepRowModel(BaseModel):
    beta: float
    gamma: float
    tau: float
    mean_iou: float
    acceptance_rate: float
    fallback_rate: float
    acc_at_half: float


class SweepResponse(BaseModel):
    rows: list[SweepRowModel]


class HealthResponse(BaseModel):
    status: str
    version: str
