"""Instruction-tuning data construction.

Turns a dataset plus file-backed reasoning traces into training examples:
a rendered instruction, the source sentence, and a target consisting of the
reasoning followed by one serialized record per gold entity, with gold boxes
replaced by guard-checked jittered boxes.

Targets are text, so boxes are quantized to integers by the serializer.  The
builder re-checks the IoU guard on the quantized box and falls back to the
gold box when quantization alone would drop it below tau; emitted targets
therefore always re-validate cleanly against the gold file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigError, InputError
from .geometry import Box, iou
from .grbp import GrbpConfig, perturb_example
from .records import (
    Example,
    EntityRecord,
    Generation,
    is_record_line,
    load_dataset,
    parse_generation,
    round_half_away_from_zero,
    serialize_record,
    _iter_jsonl,
)

SENTENCE_PLACEHOLDER = "{sentence}"


@dataclass(frozen=True)
class InstructionTemplate:
    name: str
    body: str

    def __post_init__(self) -> None:
        n = self.body.count(SENTENCE_PLACEHOLDER)
        if n != 1:
            raise ConfigError(
                f"template {self.name!r} must contain exactly one {SENTENCE_PLACEHOLDER} "
                f"placeholder, found {n}"
            )

    def render(self, sentence: str) -> str:
        return self.body.replace(SENTENCE_PLACEHOLDER, sentence)


def load_template(path: str) -> InstructionTemplate:
    try:
        with open(path, "r", encoding="utf-8") as f:
            body = f.read()
    except OSError as e:
        raise InputError(f"cannot open template {path}: {e}") from e
    name = path.rsplit("/", 1)[-1]
    if "." in name:
        name = name.rsplit(".", 1)[0]
    return InstructionTemplate(name=name, body=body)


def default_template() -> InstructionTemplate:
    from importlib.resources import files

    body = files("gmnerkit.templates").joinpath("default.txt").read_text(encoding="utf-8")
    return InstructionTemplate(name="default", body=body)


class ReasoningProvider:
    """Keyed lookup of reasoning traces loaded from a JSONL file."""

    def __init__(self, traces: Mapping[str, str]) -> None:
        self._traces = dict(traces)

    @classmethod
    def from_jsonl(cls, path: str) -> "ReasoningProvider":
        traces: dict[str, str] = {}
        for lineno, obj in _iter_jsonl(path):
            ctx = f"{path}:{lineno}"
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) \
                    or not isinstance(obj.get("reasoning"), str):
                raise InputError(f"{ctx}: expected an object with string fields 'id' and 'reasoning'")
            if obj["id"] in traces:
                raise InputError(f"{ctx}: duplicate trace id {obj['id']!r}")
            traces[obj["id"]] = obj["reasoning"]
        return cls(traces)

    def get(self, ex_id: str) -> str | None:
        return self._traces.get(ex_id)

    def __len__(self) -> int:
        return len(self._traces)


@dataclass(frozen=True)
class TrainingExample:
    id: str
    instruction: str
    image_ref: str
    input_text: str
    target: str


@dataclass
class BuildReport:
    n_input: int = 0
    n_built: int = 0
    n_records: int = 0
    n_perturbed: int = 0
    n_fallback: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def counts(self) -> dict:
        return {
            "examples_in": self.n_input,
            "examples_built": self.n_built,
            "examples_skipped": len(self.skipped),
            "records": self.n_records,
            "boxes_perturbed": self.n_perturbed,
            "boxes_fallback": self.n_fallback,
        }


def _quantize_box(b: Box) -> Box | None:
    """Round to the serializer's integer grid; None when rounding degenerates."""
    x1, y1, x2, y2 = (round_half_away_from_zero(v) for v in b.as_tuple())
    if x2 <= x1 or y2 <= y1:
        return None
    return Box(float(x1), float(y1), float(x2), float(y2))


def _target_records(
    ex: Example, cfg: GrbpConfig, base_seed: int, report: BuildReport
) -> list[EntityRecord]:
    """Gold records with jittered boxes, re-guarded at serialization precision."""
    perturbed, _ = perturb_example(ex, cfg, base_seed)
    out: list[EntityRecord] = []
    for orig, jittered in zip(ex.gold, perturbed.gold):
        if orig.box is None:
            out.append(orig)
            continue
        report.n_perturbed += 1
        q = None
        if jittered.box != orig.box:
            q = _quantize_box(jittered.box)
            if q is not None and iou(q, orig.box) < cfg.tau:
                q = None
        if q is None:
            # Guard failed (or the jitter already fell back): emit the gold box.
            q = _quantize_box(orig.box)
            if q is None:
                raise InputError(
                    f"example {ex.id!r}: gold box {orig.box.as_tuple()} collapses when "
                    "rounded to integer pixels"
                )
            report.n_fallback += 1
        out.append(EntityRecord(span=orig.span, etype=orig.etype, box=q))
    return out


def build_training_set(
    dataset: Sequence[Example],
    template: InstructionTemplate,
    reasoning: ReasoningProvider | None,
    cfg: GrbpConfig,
    base_seed: int,
    use_cot: bool = True,
) -> tuple[list[TrainingExample], BuildReport]:
    """Build one training example per dataset example, in input order.

    In CoT mode every example needs a reasoning trace; missing or unusable
    traces put the example in the skip report instead of failing the run.
    Traces containing record-shaped lines are rejected, not escaped, so the
    record block of a target always parses back to exactly the gold records.
    """
    if use_cot and reasoning is None:
        raise ConfigError("CoT mode needs a reasoning provider; pass use_cot=False to omit reasoning")
    report = BuildReport(n_input=len(dataset))
    built: list[TrainingExample] = []
    for ex in dataset:
        trace = None
        if use_cot:
            trace = reasoning.get(ex.id)
            if trace is None:
                report.skipped.append((ex.id, "no reasoning trace for this id"))
                continue
            bad = [ln for ln in trace.splitlines() if is_record_line(ln)]
            if bad:
                report.skipped.append(
                    (ex.id, f"reasoning contains {len(bad)} record-shaped line(s), e.g. {bad[0]!r}")
                )
                continue
        records = _target_records(ex, cfg, base_seed, report)
        lines = [serialize_record(r) for r in records]
        parts = ([trace] if trace is not None else []) + lines
        built.append(
            TrainingExample(
                id=ex.id,
                instruction=template.render(ex.text),
                image_ref=ex.image_ref,
                input_text=ex.text,
                target="\n".join(parts),
            )
        )
        report.n_built += 1
        report.n_records += len(records)
    return built, report


def write_training_set(examples: Sequence[TrainingExample], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            obj = {
                "id": ex.id,
                "instruction": ex.instruction,
                "image_path": ex.image_ref,
                "input_text": ex.input_text,
                "target": ex.target,
            }
            f.write(json.dumps(obj, ensure_ascii=False))
            f.write("\n")


def load_training_set(path: str) -> list[TrainingExample]:
    out: list[TrainingExample] = []
    for lineno, obj in _iter_jsonl(path):
        ctx = f"{path}:{lineno}"
        if not isinstance(obj, dict):
            raise InputError(f"{ctx}: expected an object")
        try:
            out.append(
                TrainingExample(
                    id=obj["id"],
                    instruction=obj["instruction"],
                    image_ref=obj["image_path"],
                    input_text=obj["input_text"],
                    target=obj["target"],
                )
            )
        except KeyError as e:
            raise InputError(f"{ctx}: missing field {e}") from e
    return out


def write_manifest(
    path: str,
    template_name: str,
    cfg: GrbpConfig,
    base_seed: int,
    report: BuildReport,
    toolkit_version: str,
) -> None:
    obj = {
        "template": template_name,
        "grbp": {
            "beta": cfg.beta,
            "gamma": cfg.gamma,
            "tau": cfg.tau,
            "max_tries": cfg.max_tries,
            "min_size": cfg.min_size,
            "s_min": cfg.s_min,
            "s_max": cfg.s_max,
        },
        "base_seed": base_seed,
        "counts": report.counts(),
        "skipped": [{"id": ex_id, "reason": reason} for ex_id, reason in report.skipped],
        "toolkit_version": toolkit_version,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write("\n")


@dataclass
class ValidationReport:
    n_examples: int = 0
    n_records: int = 0
    malformed: list[tuple[str, str, str]] = field(default_factory=list)  # (id, line, reason)
    guard_violations: list[tuple[str, str]] = field(default_factory=list)  # (id, detail)
    missing_gold: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.malformed and not self.guard_violations and not self.missing_gold

    def to_dict(self) -> dict:
        return {
            "examples": self.n_examples,
            "records_recovered": self.n_records,
            "malformed_lines": [
                {"id": i, "line": l, "reason": r} for i, l, r in self.malformed
            ],
            "guard_violations": [{"id": i, "detail": d} for i, d in self.guard_violations],
            "missing_gold_ids": list(self.missing_gold),
            "ok": self.ok,
        }


def validate_training_set(
    path: str,
    gold_path: str | None = None,
    tau: float | None = None,
) -> ValidationReport:
    """Re-parse every target; optionally check boxes against the original gold.

    The guard check accepts a record box when its IoU with the gold box is at
    least tau, or when it equals the gold box at serialization precision.
    """
    training = load_training_set(path)
    report = ValidationReport(n_examples=len(training))
    golds: dict[str, Example] = {}
    if gold_path is not None:
        if tau is None:
            raise ConfigError("guard validation needs tau (pass it or read it from the manifest)")
        golds = {ex.id: ex for ex in load_dataset(gold_path)}

    for t in training:
        parsed = parse_generation(Generation(id=t.id, raw_text=t.target))
        report.n_records += len(parsed.records)
        for line, reason in parsed.malformed_lines:
            report.malformed.append((t.id, line, reason))
        if gold_path is None:
            continue
        gold_ex = golds.get(t.id)
        if gold_ex is None:
            report.missing_gold.append(t.id)
            continue
        if len(parsed.records) != len(gold_ex.gold):
            report.guard_violations.append(
                (t.id, f"target has {len(parsed.records)} records, gold has {len(gold_ex.gold)}")
            )
            continue
        for idx, (rec, gold_rec) in enumerate(zip(parsed.records, gold_ex.gold)):
            if rec.span != gold_rec.span or rec.etype != gold_rec.etype:
                report.guard_violations.append(
                    (t.id, f"record {idx}: span/type differ from gold ({rec.span!r}/{rec.etype!r})")
                )
                continue
            if gold_rec.box is None:
                if rec.box is not None:
                    report.guard_violations.append((t.id, f"record {idx}: gold has no box"))
                continue
            if rec.box is None:
                report.guard_violations.append((t.id, f"record {idx}: box missing from target"))
                continue
            if rec.box == _quantize_box(gold_rec.box):
                continue
            if iou(rec.box, gold_rec.box) < tau:
                report.guard_violations.append(
                    (t.id, f"record {idx}: IoU {iou(rec.box, gold_rec.box):.4f} < tau {tau}")
                )
    return report
