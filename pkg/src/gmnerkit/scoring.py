"""Scoring protocol: span/type/box correctness, micro P/R/F1, Acc@IoU, mean IoU.

Three tasks are scored from the same matched pairs:

* MNER  — span and type must match;
* EEG   — span must match and the box must be correct (both absent, or
          IoU >= 0.5), type is ignored;
* GMNER — both of the above (the product of the two correctness bits).

Candidate pairs require exact span equality on normalized surface forms;
among candidates, pairing is greedy by descending IoU rank (1.0 when both
boxes are absent, actual IoU when both are present, else 0.0) with a
deterministic (gold index, pred index) tie-break.  An exhaustive oracle
matcher bounds any gap the greedy rule introduces on duplicate spans.

Zero-denominator conventions: precision, recall, F1, Acc@thr and mean IoU
are all 0 when their denominators are 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import OracleSizeError
from .geometry import Box, iou
from .records import EntityRecord

GROUNDING_IOU_THRESHOLD = 0.5  # fixed benchmark criterion for box correctness

DEFAULT_ACC_THRESHOLDS = (0.5, 0.75)

ORACLE_MAX_RECORDS = 6


@dataclass(frozen=True)
class MatchOutcome:
    """Correctness bits for one matched pair: c = c_et * c_b."""

    c_et: int
    c_b: int

    @property
    def c(self) -> int:
        return self.c_et * self.c_b


@dataclass(frozen=True)
class MatchedPair:
    pred_index: int
    gold_index: int
    outcome: MatchOutcome
    rank_iou: float


def _rank_iou(pred_box: Box | None, gold_box: Box | None) -> float:
    if pred_box is None and gold_box is None:
        return 1.0
    if pred_box is None or gold_box is None:
        return 0.0
    return iou(pred_box, gold_box)


def _outcome(pred: EntityRecord, gold: EntityRecord, rank: float) -> MatchOutcome:
    c_et = int(pred.etype == gold.etype)
    if pred.box is None and gold.box is None:
        c_b = 1
    elif pred.box is None or gold.box is None:
        c_b = 0
    else:
        c_b = int(rank >= GROUNDING_IOU_THRESHOLD)
    return MatchOutcome(c_et=c_et, c_b=c_b)


def match_records(
    pred: Sequence[EntityRecord], gold: Sequence[EntityRecord]
) -> list[MatchedPair]:
    """Greedy one-to-one matching over span-equal candidate pairs."""
    candidates = []
    for gi, g in enumerate(gold):
        for pi, p in enumerate(pred):
            if p.span == g.span:
                candidates.append((-_rank_iou(p.box, g.box), gi, pi))
    candidates.sort()
    pairs: list[MatchedPair] = []
    used_gold: set[int] = set()
    used_pred: set[int] = set()
    for neg_rank, gi, pi in candidates:
        if gi in used_gold or pi in used_pred:
            continue
        used_gold.add(gi)
        used_pred.add(pi)
        rank = -neg_rank
        pairs.append(
            MatchedPair(
                pred_index=pi,
                gold_index=gi,
                outcome=_outcome(pred[pi], gold[gi], rank),
                rank_iou=rank,
            )
        )
    return pairs


def dedupe_records(records: Iterable[EntityRecord]) -> list[EntityRecord]:
    """Collapse exact duplicates, keeping first-occurrence order."""
    seen = set()
    out = []
    for r in records:
        key = (r.span, r.etype, None if r.box is None else r.box.as_tuple())
        if key in seen:
            continue
        seen.add(key)
        out.append(r)
    return out


@dataclass(frozen=True)
class TaskScore:
    n_correct: int
    n_pred: int
    n_gold: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, n_correct: int, n_pred: int, n_gold: int) -> "TaskScore":
        precision = n_correct / n_pred if n_pred else 0.0
        recall = n_correct / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(n_correct, n_pred, n_gold, precision, recall, f1)

    def to_dict(self, ndigits: int = 4) -> dict:
        return {
            "n_correct": self.n_correct,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
            "precision": round(self.precision, ndigits),
            "recall": round(self.recall, ndigits),
            "f1": round(self.f1, ndigits),
        }


@dataclass(frozen=True)
class ScoreReport:
    mner: TaskScore
    eeg: TaskScore
    gmner: TaskScore
    acc_at: dict[float, float]
    mean_iou: float
    n_gold_with_box: int

    def to_dict(self, ndigits: int = 4) -> dict:
        return {
            "mner": self.mner.to_dict(ndigits),
            "eeg": self.eeg.to_dict(ndigits),
            "gmner": self.gmner.to_dict(ndigits),
            "acc_at": {f"{thr:g}": round(acc, ndigits) for thr, acc in sorted(self.acc_at.items())},
            "mean_iou": round(self.mean_iou, ndigits),
            "n_gold_with_box": self.n_gold_with_box,
        }


class _Accumulator:
    def __init__(self, thresholds: Sequence[float]) -> None:
        self.thresholds = tuple(thresholds)
        self.n_pred = 0
        self.n_gold = 0
        self.mner = 0
        self.eeg = 0
        self.gmner = 0
        self.n_gold_with_box = 0
        self.iou_sum = 0.0
        self.matched_at = {thr: 0 for thr in self.thresholds}

    def add_example(
        self,
        pred: Sequence[EntityRecord],
        gold: Sequence[EntityRecord],
        pairs: Sequence[MatchedPair],
    ) -> None:
        self.n_pred += len(pred)
        self.n_gold += len(gold)
        for pair in pairs:
            self.mner += pair.outcome.c_et
            self.eeg += pair.outcome.c_b
            self.gmner += pair.outcome.c
        by_gold = {pair.gold_index: pair for pair in pairs}
        for gi, g in enumerate(gold):
            if g.box is None:
                continue
            self.n_gold_with_box += 1
            pair = by_gold.get(gi)
            if pair is None or pred[pair.pred_index].box is None:
                continue
            v = iou(pred[pair.pred_index].box, g.box)
            self.iou_sum += v
            for thr in self.thresholds:
                if v >= thr:
                    self.matched_at[thr] += 1

    def report(self) -> ScoreReport:
        denom = self.n_gold_with_box
        return ScoreReport(
            mner=TaskScore.from_counts(self.mner, self.n_pred, self.n_gold),
            eeg=TaskScore.from_counts(self.eeg, self.n_pred, self.n_gold),
            gmner=TaskScore.from_counts(self.gmner, self.n_pred, self.n_gold),
            acc_at={thr: (self.matched_at[thr] / denom if denom else 0.0) for thr in self.thresholds},
            mean_iou=self.iou_sum / denom if denom else 0.0,
            n_gold_with_box=denom,
        )


def score(
    preds: Mapping[str, Sequence[EntityRecord]],
    golds: Mapping[str, Sequence[EntityRecord]],
    thresholds: Sequence[float] = DEFAULT_ACC_THRESHOLDS,
) -> ScoreReport:
    """Corpus-level micro scores.

    Gold ids with no prediction entry count as empty prediction lists; pred
    ids absent from golds are ignored (callers report them).  Exact duplicate
    predictions are collapsed before counting.
    """
    acc = _Accumulator(thresholds)
    for ex_id in golds:
        gold = list(golds[ex_id])
        pred = dedupe_records(preds.get(ex_id, ()))
        acc.add_example(pred, gold, match_records(pred, gold))
    return acc.report()


def _best_matching(
    pred: Sequence[EntityRecord], gold: Sequence[EntityRecord]
) -> list[MatchedPair]:
    """Exhaustive search over one-to-one span-equal pairings.

    Maximizes (GMNER correct, EEG correct, MNER correct, total rank IoU)
    lexicographically; the first maximum in deterministic enumeration order
    (gold index ascending, pred index ascending, unmatched last) wins.
    """
    candidates_by_gold: list[list[int]] = [
        [pi for pi, p in enumerate(pred) if p.span == g.span] for g in gold
    ]
    best_key: tuple[int, int, int, float] | None = None
    best_pairs: list[MatchedPair] | None = None

    def recurse(gi: int, used: set[int], pairs: list[MatchedPair],
                key: tuple[int, int, int, float]) -> None:
        nonlocal best_key, best_pairs
        if gi == len(gold):
            if best_key is None or key > best_key:
                best_key = key
                best_pairs = list(pairs)
            return
        for pi in candidates_by_gold[gi]:
            if pi in used:
                continue
            rank = _rank_iou(pred[pi].box, gold[gi].box)
            outcome = _outcome(pred[pi], gold[gi], rank)
            used.add(pi)
            pairs.append(MatchedPair(pred_index=pi, gold_index=gi, outcome=outcome, rank_iou=rank))
            recurse(gi + 1, used, pairs,
                    (key[0] + outcome.c, key[1] + outcome.c_b, key[2] + outcome.c_et, key[3] + rank))
            pairs.pop()
            used.remove(pi)
        recurse(gi + 1, used, pairs, key)

    recurse(0, set(), [], (0, 0, 0, 0.0))
    assert best_pairs is not None
    return best_pairs


def oracle_score(
    preds: Mapping[str, Sequence[EntityRecord]],
    golds: Mapping[str, Sequence[EntityRecord]],
    thresholds: Sequence[float] = DEFAULT_ACC_THRESHOLDS,
) -> ScoreReport:
    """Like score() but with exhaustive optimal matching; small instances only."""
    acc = _Accumulator(thresholds)
    for ex_id in golds:
        gold = list(golds[ex_id])
        pred = dedupe_records(preds.get(ex_id, ()))
        if len(gold) > ORACLE_MAX_RECORDS or len(pred) > ORACLE_MAX_RECORDS:
            raise OracleSizeError(
                f"example {ex_id!r} has {len(pred)} predictions / {len(gold)} gold records; "
                f"the exhaustive oracle handles at most {ORACLE_MAX_RECORDS} per side"
            )
        acc.add_example(pred, gold, _best_matching(pred, gold))
    return acc.report()
