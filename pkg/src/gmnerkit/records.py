"""Entity-record grammar, generation parsing, and line-oriented dataset IO.

The record grammar, canonical on emit and whitespace-tolerant on parse:

    record     = span " | " type " | " (boxliteral / "None")
    boxliteral = "[" int ", " int ", " int ", " int "]"

Fields split right-to-left (last field is the box, second-to-last the type,
everything before is the span), so spans may contain pipes.  Parsing is
total: any text yields a (reasoning, records, malformed-line diagnostics)
triple and never raises.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DatasetError, InputError, SerializationError
from .geometry import Box, ImageDims, box_within

COORD_FRAME_ABSOLUTE = "absolute"
COORD_FRAME_NORMALIZED_1000 = "normalized-1000"

NO_BOX_TOKEN = "None"

# Accepts integers or plain decimals, optionally signed.
_NUMBER = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)"
_BOX_LITERAL_RE = re.compile(
    rf"^\[\s*({_NUMBER})\s*,\s*({_NUMBER})\s*,\s*({_NUMBER})\s*,\s*({_NUMBER})\s*\]$"
)
_BOXISH_RE = re.compile(r"^\[.*\]$", re.DOTALL)


def normalize_text(s: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return " ".join(s.split())


@dataclass(frozen=True)
class EntityRecord:
    """One (span, type, optional box) entity record."""

    span: str
    etype: str
    box: Box | None = None

    def __post_init__(self) -> None:
        for name, value in (("span", self.span), ("type", self.etype)):
            if value != normalize_text(value) or not value:
                raise InputError(
                    f"record {name} must be non-empty and whitespace-normalized, got {value!r}"
                )


@dataclass(frozen=True)
class Example:
    """One dataset instance: text, image reference and size, gold records."""

    id: str
    text: str
    image_ref: str
    dims: ImageDims
    gold: tuple[EntityRecord, ...]
    reasoning: str | None = None


@dataclass(frozen=True)
class Generation:
    """Raw model output for one example."""

    id: str
    raw_text: str


@dataclass(frozen=True)
class ParsedPrediction:
    id: str
    reasoning: str
    records: tuple[EntityRecord, ...]
    malformed_lines: tuple[tuple[str, str], ...] = field(default_factory=tuple)


def round_half_away_from_zero(x: float) -> int:
    """Round to nearest integer, halves away from zero (the serializer's rule)."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def _check_field(name: str, value: str) -> None:
    if " | " in value:
        raise SerializationError(
            f"record {name} contains the field delimiter ' | ' and cannot be "
            f"serialized unambiguously: {value!r}"
        )


def serialize_record(r: EntityRecord) -> str:
    """Canonical one-line form: ``span | type | [x1, y1, x2, y2]`` or ``span | type | None``."""
    _check_field("span", r.span)
    _check_field("type", r.etype)
    if r.box is None:
        box_part = NO_BOX_TOKEN
    else:
        coords = [round_half_away_from_zero(v) for v in r.box.as_tuple()]
        box_part = "[" + ", ".join(str(c) for c in coords) + "]"
    return f"{r.span} | {r.etype} | {box_part}"


def serialize_records(records: Iterable[EntityRecord]) -> str:
    """Records joined by newlines, one per line."""
    return "\n".join(serialize_record(r) for r in records)


def _is_candidate_line(line: str) -> bool:
    """Line looks like a record attempt: has a pipe and a box-ish last field."""
    if "|" not in line:
        return False
    last = line.rsplit("|", 1)[1].strip()
    return bool(_BOXISH_RE.match(last)) or last.lower() == NO_BOX_TOKEN.lower()


def _parse_candidate_line(
    line: str, coord_frame: str, dims: ImageDims | None
) -> EntityRecord | str:
    """Parse one candidate line; returns a record or a diagnostic reason."""
    parts = line.split("|")
    if len(parts) < 3:
        return "expected three pipe-separated fields (span | type | box)"
    box_field = parts[-1].strip()
    type_field = normalize_text(parts[-2])
    span_field = normalize_text("|".join(parts[:-2]))
    if not span_field:
        return "empty span field"
    if not type_field:
        return "empty type field"

    if box_field.lower() == NO_BOX_TOKEN.lower():
        box = None
    else:
        m = _BOX_LITERAL_RE.match(box_field)
        if not m:
            return f"box field is not '[x1, y1, x2, y2]' or '{NO_BOX_TOKEN}': {box_field!r}"
        coords = [float(g) for g in m.groups()]
        if coord_frame == COORD_FRAME_NORMALIZED_1000:
            if dims is None:
                return "normalized coordinates require image dimensions"
            coords = [
                coords[0] / 1000.0 * dims.width,
                coords[1] / 1000.0 * dims.height,
                coords[2] / 1000.0 * dims.width,
                coords[3] / 1000.0 * dims.height,
            ]
        if coords[2] <= coords[0] or coords[3] <= coords[1]:
            return f"box has non-positive extent: {box_field}"
        box = Box(*coords)
    return EntityRecord(span=span_field, etype=type_field, box=box)


def parse_generation(
    g: Generation,
    coord_frame: str = COORD_FRAME_ABSOLUTE,
    dims: ImageDims | None = None,
) -> ParsedPrediction:
    """Split a raw generation into reasoning and structured records.

    The record section is the maximal trailing run of candidate lines (lines
    with a pipe and a box-shaped or None last field); blank lines inside the
    run are skipped.  Everything above it is reasoning.  Candidate lines that
    fail the grammar become malformed-line diagnostics, never silent drops.
    """
    if coord_frame not in (COORD_FRAME_ABSOLUTE, COORD_FRAME_NORMALIZED_1000):
        raise InputError(f"unknown coordinate frame {coord_frame!r}")
    lines = g.raw_text.splitlines()

    block_start = len(lines)
    i = len(lines) - 1
    saw_candidate = False
    while i >= 0:
        line = lines[i]
        if not line.strip():
            i -= 1
            continue
        if _is_candidate_line(line):
            saw_candidate = True
            block_start = i
            i -= 1
            continue
        break
    if not saw_candidate:
        block_start = len(lines)

    reasoning = "\n".join(lines[:block_start]).rstrip()
    records: list[EntityRecord] = []
    malformed: list[tuple[str, str]] = []
    for line in lines[block_start:]:
        if not line.strip():
            continue
        if not _is_candidate_line(line):
            # Unreachable if the scan above is correct, but never drop silently.
            malformed.append((line, "line inside record block does not look like a record"))
            continue
        parsed = _parse_candidate_line(line, coord_frame, dims)
        if isinstance(parsed, EntityRecord):
            records.append(parsed)
        else:
            malformed.append((line, parsed))
    return ParsedPrediction(
        id=g.id,
        reasoning=reasoning,
        records=tuple(records),
        malformed_lines=tuple(malformed),
    )


def is_record_line(line: str) -> bool:
    """True when the line parses as a grammar-valid record (absolute frame)."""
    if not _is_candidate_line(line):
        return False
    return isinstance(_parse_candidate_line(line, COORD_FRAME_ABSOLUTE, None), EntityRecord)


# --- dataset / generations files (JSONL) ---------------------------------


def _coerce_str(obj: dict, key: str, ctx: str) -> str:
    v = obj.get(key)
    if not isinstance(v, str):
        raise DatasetError(f"{ctx}: field {key!r} must be a string, got {v!r}")
    return v


def _coerce_dim(obj: dict, key: str, ctx: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise DatasetError(f"{ctx}: field {key!r} must be a positive integer, got {v!r}")
    return v


def _entity_from_obj(obj: object, ctx: str, dims: ImageDims) -> EntityRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"{ctx}: entity must be an object, got {obj!r}")
    span = normalize_text(_coerce_str(obj, "span", ctx))
    etype = normalize_text(_coerce_str(obj, "type", ctx))
    if not span:
        raise DatasetError(f"{ctx}: field 'span' is empty after normalization")
    if not etype:
        raise DatasetError(f"{ctx}: field 'type' is empty after normalization")
    raw_box = obj.get("box")
    if raw_box is None:
        box = None
    else:
        if (
            not isinstance(raw_box, list)
            or len(raw_box) != 4
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in raw_box)
        ):
            raise DatasetError(f"{ctx}: field 'box' must be null or [x1, y1, x2, y2], got {raw_box!r}")
        try:
            box = Box(*(float(c) for c in raw_box))
        except InputError as e:
            raise DatasetError(f"{ctx}: field 'box': {e}") from e
        if not box_within(box, dims):
            raise DatasetError(
                f"{ctx}: field 'box' {raw_box} lies outside the "
                f"{dims.width}x{dims.height} image"
            )
    return EntityRecord(span=span, etype=etype, box=box)


def example_from_obj(obj: object, ctx: str = "example") -> Example:
    """Build a validated Example from a decoded JSON object."""
    if not isinstance(obj, dict):
        raise DatasetError(f"{ctx}: expected an object, got {type(obj).__name__}")
    ex_id = _coerce_str(obj, "id", ctx)
    if not ex_id:
        raise DatasetError(f"{ctx}: field 'id' must be non-empty")
    ctx = f"{ctx} id={ex_id!r}"
    dims = ImageDims(_coerce_dim(obj, "image_width", ctx), _coerce_dim(obj, "image_height", ctx))
    entities = obj.get("entities")
    if not isinstance(entities, list):
        raise DatasetError(f"{ctx}: field 'entities' must be a list")
    gold = tuple(_entity_from_obj(e, ctx, dims) for e in entities)
    reasoning = obj.get("reasoning")
    if reasoning is not None and not isinstance(reasoning, str):
        raise DatasetError(f"{ctx}: field 'reasoning' must be a string or null")
    return Example(
        id=ex_id,
        text=_coerce_str(obj, "text", ctx),
        image_ref=_coerce_str(obj, "image_path", ctx),
        dims=dims,
        gold=gold,
        reasoning=reasoning,
    )


def _canonical_coord(v: float) -> int | float:
    return int(v) if float(v).is_integer() else float(v)


def example_to_obj(ex: Example) -> dict:
    """Wire-format dict for one example (field order is part of the contract)."""
    obj: dict = {
        "id": ex.id,
        "text": ex.text,
        "image_path": ex.image_ref,
        "image_width": ex.dims.width,
        "image_height": ex.dims.height,
        "entities": [
            {
                "span": r.span,
                "type": r.etype,
                "box": None if r.box is None else [_canonical_coord(c) for c in r.box.as_tuple()],
            }
            for r in ex.gold
        ],
    }
    if ex.reasoning is not None:
        obj["reasoning"] = ex.reasoning
    return obj


def _iter_jsonl(path: str) -> Iterable[tuple[int, object]]:
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot open {path}: {e}") from e
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {e}") from e


def load_dataset(path: str) -> list[Example]:
    """Read a JSONL dataset; rejects duplicate ids and out-of-image boxes."""
    examples: list[Example] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_jsonl(path):
        ex = example_from_obj(obj, ctx=f"{path}:{lineno}")
        if ex.id in seen:
            raise DatasetError(
                f"{path}:{lineno}: duplicate example id {ex.id!r} (first seen on line {seen[ex.id]})"
            )
        seen[ex.id] = lineno
        examples.append(ex)
    return examples


def write_dataset(examples: Sequence[Example], path: str) -> None:
    """Write examples as canonical JSONL (stable field order, ASCII-preserving)."""
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(example_to_obj(ex), ensure_ascii=False))
            f.write("\n")


def load_generations(path: str) -> list[Generation]:
    """Read a generations JSONL file ({"id", "output"} per line)."""
    gens: list[Generation] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_jsonl(path):
        ctx = f"{path}:{lineno}"
        if not isinstance(obj, dict):
            raise DatasetError(f"{ctx}: expected an object")
        gen_id = _coerce_str(obj, "id", ctx)
        output = obj.get("output")
        if not isinstance(output, str):
            raise DatasetError(f"{ctx}: field 'output' must be a string")
        if gen_id in seen:
            raise DatasetError(
                f"{ctx}: duplicate generation id {gen_id!r} (first seen on line {seen[gen_id]})"
            )
        seen[gen_id] = lineno
        gens.append(Generation(id=gen_id, raw_text=output))
    return gens


def write_generations(gens: Sequence[Generation], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for g in gens:
            f.write(json.dumps({"id": g.id, "output": g.raw_text}, ensure_ascii=False))
            f.write("\n")
