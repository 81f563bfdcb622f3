"""Scoring: micro-F1, k sweeps, the MFS baseline row, POS breakdowns.

F1 is micro-averaged over instances (not macro over lexelts); with full
prediction coverage it equals plain accuracy.  A prediction is correct when
it is in the instance's gold sense set.  Percentages are rendered with
half-up rounding to two decimals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .classifier import (
    ExemplarIndex,
    Prediction,
    PredictionSource,
    classify_all,
)
from .corpus import POS_ORDER, Corpus, Pos, mfs_table, sense_frequencies
from .errors import ConsistencyError, UserArgumentError


@dataclass(frozen=True)
class EvalReport:
    attempted: int
    total: int
    correct: int

    @property
    def precision(self) -> float:
        return 100.0 * self.correct / self.attempted if self.attempted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class PosRow:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0


@dataclass(frozen=True)
class PosBreakdown:
    rows: dict[Pos, PosRow]


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[tuple[int, EvalReport], ...]
    best_k: int


def _gold_map(gold: Corpus) -> dict[str, frozenset[str]]:
    return {
        inst.id: inst.gold_senses for inst in gold.instances if inst.gold_senses
    }


def _check_predictions(preds: list[Prediction], gold: Corpus) -> None:
    known = {inst.id for inst in gold.instances}
    seen: set[str] = set()
    for pred in preds:
        if pred.instance_id not in known:
            raise ConsistencyError(
                f"prediction for unknown instance id {pred.instance_id!r}"
            )
        if pred.instance_id in seen:
            raise ConsistencyError(
                f"multiple predictions for instance id {pred.instance_id!r}"
            )
        seen.add(pred.instance_id)


def score(preds: list[Prediction], gold: Corpus) -> EvalReport:
    """Micro-F1 of predictions against a gold corpus.

    total counts the gold-annotated instances, attempted the predictions
    made; an instance is correct when the prediction is in its gold set.
    """
    _check_predictions(preds, gold)
    gold_senses = _gold_map(gold)
    correct = sum(
        1 for pred in preds if pred.predicted in gold_senses.get(pred.instance_id, ())
    )
    return EvalReport(attempted=len(preds), total=len(gold_senses), correct=correct)


def pos_breakdown(preds: list[Prediction], gold: Corpus) -> PosBreakdown:
    """Correct-classification counts partitioned by the lexelt POS."""
    _check_predictions(preds, gold)
    gold_senses = _gold_map(gold)
    pos_by_id = {inst.id: inst.lexelt.pos for inst in gold.instances}
    totals = {pos: 0 for pos in POS_ORDER}
    corrects = {pos: 0 for pos in POS_ORDER}
    for inst in gold.instances:
        if inst.gold_senses:
            totals[inst.lexelt.pos] += 1
    for pred in preds:
        if pred.predicted in gold_senses.get(pred.instance_id, ()):
            corrects[pos_by_id[pred.instance_id]] += 1
    return PosBreakdown(
        rows={pos: PosRow(corrects[pos], totals[pos]) for pos in POS_ORDER}
    )


def sweep(
    index: ExemplarIndex,
    test_pairs,
    ks: list[int],
    gold: Corpus,
) -> SweepTable:
    """One classify-and-score pass per k; best row marked (ties: smaller k)."""
    if not ks or any(k < 1 for k in ks):
        raise UserArgumentError(f"k values must be positive, got {ks!r}")
    rows = []
    for k in ks:
        run = classify_all(index, test_pairs, k)
        rows.append((k, score(run.predictions, gold)))
    best_k = min(rows, key=lambda row: (-row[1].f1, row[0]))[0]
    return SweepTable(rows=tuple(rows), best_k=best_k)


def mfs_predictions(train: Corpus, test: Corpus) -> list[Prediction]:
    """The most-frequent-sense baseline predictor.

    Lexelts unseen in training fall back to the most frequent training sense
    of the same POS; instances with no fallback at all are skipped.
    """
    table = mfs_table(train)
    pos_counts: dict[Pos, dict] = {}
    for lexelt, counter in sense_frequencies(train).items():
        bucket = pos_counts.setdefault(lexelt.pos, {})
        for sense, count in counter.items():
            bucket[sense] = bucket.get(sense, 0) + count
    pos_mfs = {
        pos: min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        for pos, counts in pos_counts.items()
        if counts
    }
    preds = []
    for inst in test.instances:
        sense = table.get(inst.lexelt, pos_mfs.get(inst.lexelt.pos))
        if sense is None:
            continue
        preds.append(
            Prediction(inst.id, sense, (), PredictionSource.MFS_FALLBACK)
        )
    return preds


# --------------------------------------------------------------------------
# Rendering


def format_pct(value: float) -> str:
    """Two decimals, half-up (58.955 -> '58.96')."""
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), ROUND_HALF_UP))


def report_dict(
    sweep_table: SweepTable,
    breakdown: PosBreakdown | None,
    model_tag: str,
    dataset: str,
    mfs_f1: float | None = None,
) -> dict:
    payload = {
        "model_tag": model_tag,
        "dataset": dataset,
        "rows": [
            {
                "k": k,
                "p": float(format_pct(report.precision)),
                "r": float(format_pct(report.recall)),
                "f1": float(format_pct(report.f1)),
            }
            for k, report in sweep_table.rows
        ],
        "best_k": sweep_table.best_k,
        "pos": [
            {
                "pos": pos.label,
                "correct": row.correct,
                "total": row.total,
                "acc": float(format_pct(row.accuracy)),
            }
            for pos, row in (breakdown.rows.items() if breakdown else ())
        ],
        "mfs_f1": None if mfs_f1 is None else float(format_pct(mfs_f1)),
    }
    return payload


def report_render(
    sweep_table: SweepTable,
    breakdown: PosBreakdown | None,
    model_tag: str,
    dataset: str,
    mfs_f1: float | None = None,
) -> tuple[str, str]:
    """Aligned text table plus machine-readable JSON; byte-stable."""
    width = 9
    header = ["k".ljust(6)] + [str(k).rjust(width) for k, _ in sweep_table.rows]
    f1_cells = []
    for k, report in sweep_table.rows:
        cell = format_pct(report.f1)
        if k == sweep_table.best_k:
            cell = f"_{cell}_"
        f1_cells.append(cell.rjust(width))
    p_cells = [format_pct(r.precision).rjust(width) for _, r in sweep_table.rows]
    r_cells = [format_pct(r.recall).rjust(width) for _, r in sweep_table.rows]

    lines = [
        f"model: {model_tag}    dataset: {dataset}",
        "".join(header),
        "".join(["F1".ljust(6)] + f1_cells),
        "".join(["P".ljust(6)] + p_cells),
        "".join(["R".ljust(6)] + r_cells),
    ]
    if mfs_f1 is not None:
        lines.append(f"MFS baseline F1: {format_pct(mfs_f1)}")
    if breakdown is not None:
        lines.append("POS accuracy (k=1):")
        for pos in POS_ORDER:
            row = breakdown.rows[pos]
            lines.append(
                f"  {pos.label.ljust(10)} {format_pct(row.accuracy).rjust(6)}"
                f"  ({row.correct}/{row.total})"
            )
    text = "\n".join(lines) + "\n"

    payload = report_dict(sweep_table, breakdown, model_tag, dataset, mfs_f1)
    return text, json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_csv(sweep_table: SweepTable) -> str:
    """Delimited form of the sweep rows."""
    lines = ["k,precision,recall,f1"]
    for k, report in sweep_table.rows:
        lines.append(
            f"{k},{format_pct(report.precision)},{format_pct(report.recall)},"
            f"{format_pct(report.f1)}"
        )
    return "\n".join(lines) + "\n"
