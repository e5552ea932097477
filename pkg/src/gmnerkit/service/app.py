"""HTTP service wrapping the core package.

Every endpoint is a payload-level twin of a CLI subcommand: the CLI reads
and writes files, the service takes the same structures as JSON.  Toolkit
errors map to 400 (bad request) except internal invariant violations, which
map to 500.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..databuilder import InstructionTemplate, ReasoningProvider, build_training_set, default_template
from ..errors import InputError, InvariantViolation, ToolkitError
from ..geometry import Box, ImageDims
from ..grbp import GrbpConfig, perturb_example
from ..records import Example, EntityRecord, Generation, example_from_obj, parse_generation
from ..scoring import oracle_score, score
from ..sweep import BoxSamplerSpec, characterize
from . import models


def _to_grbp_config(p: models.GrbpParams) -> GrbpConfig:
    return GrbpConfig(beta=p.beta, gamma=p.gamma, tau=p.tau, max_tries=p.max_tries,
                      min_size=p.min_size, s_min=p.s_min, s_max=p.s_max)


def _to_example(m: models.ExampleModel) -> Example:
    obj: dict = {
        "id": m.id,
        "text": m.text,
        "image_path": m.image_path,
        "image_width": m.image_width,
        "image_height": m.image_height,
        "entities": [
            {"span": r.span, "type": r.type, "box": None if r.box is None else list(r.box)}
            for r in m.entities
        ],
    }
    if m.reasoning is not None:
        obj["reasoning"] = m.reasoning
    return example_from_obj(obj, ctx="payload example")


def _record_model(r: EntityRecord) -> models.RecordModel:
    return models.RecordModel(
        span=r.span, type=r.etype,
        box=None if r.box is None else r.box.as_tuple(),
    )


def _example_model(ex: Example) -> models.ExampleModel:
    return models.ExampleModel(
        id=ex.id,
        text=ex.text,
        image_path=ex.image_ref,
        image_width=ex.dims.width,
        image_height=ex.dims.height,
        entities=[_record_model(r) for r in ex.gold],
        reasoning=ex.reasoning,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="gmnerkit", version=__version__)

    @app.exception_handler(ToolkitError)
    async def _toolkit_error(_: Request, exc: ToolkitError) -> JSONResponse:
        status = 500 if isinstance(exc, InvariantViolation) else 400
        return JSONResponse(status_code=status,
                            content={"error": str(exc), "kind": type(exc).__name__})

    @app.get("/healthz", response_model=models.HealthResponse)
    def healthz() -> models.HealthResponse:
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/parse", response_model=models.ParseResponse)
    def parse(req: models.ParseRequest) -> models.ParseResponse:
        dims = None
        if req.image_width is not None and req.image_height is not None:
            dims = ImageDims(req.image_width, req.image_height)
        elif req.coord_frame == "normalized-1000":
            raise InputError("normalized coordinates need image_width and image_height")
        parsed = parse_generation(Generation(id=req.id, raw_text=req.output),
                                  coord_frame=req.coord_frame, dims=dims)
        return models.ParseResponse(
            id=parsed.id,
            reasoning=parsed.reasoning,
            records=[_record_model(r) for r in parsed.records],
            malformed_lines=[models.MalformedLine(line=l, reason=r) for l, r in parsed.malformed_lines],
        )

    @app.post("/score", response_model=models.ScoreResponse)
    def score_endpoint(req: models.ScoreRequest) -> models.ScoreResponse:
        golds = {}
        for m in req.golds:
            ex = _to_example(m)
            if ex.id in golds:
                raise InputError(f"duplicate example id {ex.id!r} in golds")
            golds[ex.id] = ex
        seen = set()
        preds = {}
        n_malformed = 0
        n_unknown = 0
        for gm in req.generations:
            if gm.id in seen:
                raise InputError(f"duplicate generation id {gm.id!r}")
            seen.add(gm.id)
            if gm.id not in golds:
                n_unknown += 1
                continue
            parsed = parse_generation(Generation(id=gm.id, raw_text=gm.output),
                                      coord_frame=req.coord_frame, dims=golds[gm.id].dims)
            n_malformed += len(parsed.malformed_lines)
            preds[gm.id] = parsed.records
        scorer = oracle_score if req.use_oracle else score
        report = scorer(preds, {ex_id: ex.gold for ex_id, ex in golds.items()}, req.thresholds)
        d = report.to_dict()
        return models.ScoreResponse(
            mner=models.TaskScoreModel(**d["mner"]),
            eeg=models.TaskScoreModel(**d["eeg"]),
            gmner=models.TaskScoreModel(**d["gmner"]),
            acc_at=d["acc_at"],
            mean_iou=d["mean_iou"],
            n_gold_with_box=d["n_gold_with_box"],
            diagnostics=models.ScoreDiagnostics(
                n_generations=len(req.generations),
                n_unknown_ids=n_unknown,
                n_missing_predictions=len(set(golds) - set(preds)),
                n_malformed_lines=n_malformed,
            ),
        )

    @app.post("/perturb", response_model=models.PerturbResponse)
    def perturb_endpoint(req: models.PerturbRequest) -> models.PerturbResponse:
        cfg = _to_grbp_config(req.grbp)
        out = []
        n_boxes = 0
        n_fallbacks = 0
        for m in req.examples:
            ex, outcomes = perturb_example(_to_example(m), cfg, req.seed)
            n_boxes += len(outcomes)
            n_fallbacks += sum(1 for o in outcomes if o.was_fallback)
            out.append(_example_model(ex))
        return models.PerturbResponse(examples=out, n_boxes=n_boxes, n_fallbacks=n_fallbacks)

    @app.post("/build-train", response_model=models.BuildResponse)
    def build_endpoint(req: models.BuildRequest) -> models.BuildResponse:
        template = (InstructionTemplate(name="inline", body=req.template_body)
                    if req.template_body is not None else default_template())
        provider = None
        if req.use_cot:
            traces: dict[str, str] = {}
            for t in req.traces:
                if t.id in traces:
                    raise InputError(f"duplicate trace id {t.id!r}")
                traces[t.id] = t.reasoning
            provider = ReasoningProvider(traces)
        dataset = [_to_example(m) for m in req.examples]
        built, report = build_training_set(dataset, template, provider,
                                           _to_grbp_config(req.grbp), req.seed, use_cot=req.use_cot)
        return models.BuildResponse(
            training_examples=[
                models.TrainingExampleModel(
                    id=t.id, instruction=t.instruction, image_path=t.image_ref,
                    input_text=t.input_text, target=t.target,
                )
                for t in built
            ],
            skipped=[models.SkippedModel(id=i, reason=r) for i, r in report.skipped],
            counts=report.counts(),
        )

    @app.post("/sweep", response_model=models.SweepResponse)
    def sweep_endpoint(req: models.SweepRequest) -> models.SweepResponse:
        base = _to_grbp_config(req.grbp)
        configs = [
            GrbpConfig(beta=v, gamma=v, tau=req.tau, max_tries=base.max_tries,
                       min_size=base.min_size, s_min=base.s_min, s_max=base.s_max)
            for v in req.grid
        ]
        sampler = BoxSamplerSpec(width=req.sampler.width, height=req.sampler.height,
                                 min_size=req.sampler.min_size, max_frac=req.sampler.max_frac)
        rows = characterize(configs, req.n_samples, req.seed, sampler=sampler)
        return models.SweepResponse(rows=[
            models.SweepRowModel(beta=r.beta, gamma=r.gamma, tau=r.tau, mean_iou=r.mean_iou,
                                 acceptance_rate=r.acceptance_rate, fallback_rate=r.fallback_rate,
                                 acc_at_half=r.acc_at_half)
            for r in rows
        ])

    return app


app = create_app()
