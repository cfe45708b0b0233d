"""Detection and selection metrics plus comparison reports.

Metric arithmetic deliberately uses plain Python sums and divisions (not
vectorized numerics) so results are bit-for-bit reproducible by a
straight-line reference computation. Reports render as JSON or as markdown
tables with detection columns Recall/Precision/F1 and selection columns
Acc@5/Acc@1/MRR@5, numbers at 4 decimals.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Corpus
from .detection import DetectorModel, detect
from .embedding import Vocabulary, build_vocabulary, tfidf_rank
from .selector import SelectorModel, readout, selection_instances

RANK_CUTOFF = 5


@dataclass(frozen=True)
class DetectionMetrics:
    precision: float
    recall: float
    f1: float
    counts: dict


@dataclass(frozen=True)
class SelectionMetrics:
    acc_at_1: float
    acc_at_5: float
    mrr_at_5: float
    n_instances: int


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def detection_metrics(predictions: list[bool], gold: list[bool]) -> DetectionMetrics:
    """Precision, recall, and F1 from aligned prediction/gold boolean lists.

    Zero denominators yield 0 for the affected metric.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(gold)} gold")
    if not predictions:
        raise ValueError("need at least one prediction")
    tp = fp = fn = tn = 0
    for predicted, actual in zip(predictions, gold):
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return DetectionMetrics(
        precision, recall, f1_score(precision, recall), {"tp": tp, "fp": fp, "fn": fn, "tn": tn}
    )


def selection_metrics(ranked_golden_positions: list[int]) -> SelectionMetrics:
    """Acc@1, Acc@5, and MRR@5 from 1-based golden ranks, one per instance.

    Reciprocal ranks beyond position 5 count as 0.
    """
    if not ranked_golden_positions:
        raise ValueError("need at least one ranked position")
    hits_at_1 = 0
    hits_at_5 = 0
    reciprocal_total = 0.0
    for position in ranked_golden_positions:
        if not isinstance(position, int) or position < 1:
            raise ValueError(f"positions must be integers >= 1, got {position!r}")
        if position == 1:
            hits_at_1 += 1
        if position <= RANK_CUTOFF:
            hits_at_5 += 1
            reciprocal_total += 1.0 / position
    n = len(ranked_golden_positions)
    return SelectionMetrics(hits_at_1 / n, hits_at_5 / n, reciprocal_total / n, n)


def _golden_position(scores, golden_index: int) -> tuple[int, int]:
    """1-based rank of the golden candidate under (score desc, index asc), plus tie count."""
    golden_score = scores[golden_index]
    position = 1
    ties = 0
    for index, score in enumerate(scores):
        if score > golden_score or (score == golden_score and index < golden_index):
            position += 1
        if score == golden_score and index != golden_index:
            ties += 1
    return position, ties


def _warn_ties(ties: int, label: str) -> None:
    if ties:
        warnings.warn(
            f"{label}: {ties} candidate scores tied with a golden score; "
            "ranks fall back to candidate order"
        )


def evaluate_selector(
    model: SelectorModel, provider, corpus: Corpus, jobs: int = 1
) -> SelectionMetrics:
    """Rank every labeled knowledge-seeking dialog and aggregate golden ranks.

    ``jobs`` > 1 ranks dialogs concurrently; aggregation stays in corpus
    order, so results are identical to the sequential run.
    """
    instances = selection_instances(corpus, provider, model.kernels)
    if not instances:
        raise ValueError("corpus has no labeled knowledge-seeking dialogs to evaluate")

    def position_of(instance):
        dist = readout(instance.features, model)
        return _golden_position(dist.probabilities, instance.golden_index)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(position_of, instances))
    else:
        outcomes = [position_of(instance) for instance in instances]
    _warn_ties(sum(t for _, t in outcomes), "selector evaluation")
    return selection_metrics([p for p, _ in outcomes])


def evaluate_tfidf(corpus: Corpus, vocab: Vocabulary | None = None) -> SelectionMetrics:
    """Golden-rank metrics for the TF-IDF baseline over the same dialogs."""
    if vocab is None:
        vocab = build_vocabulary(corpus)
    positions = []
    ties = 0
    for dialog in corpus.dialogs:
        if not dialog.target or dialog.golden is None:
            continue
        golden = dialog.golden
        candidates = corpus.snippets[(golden.domain, golden.entity_id)]
        ranked = tfidf_rank(corpus, dialog.current_turn.text, candidates, vocab)
        scores = {snippet.doc_id: score for snippet, score in ranked}
        ordered_scores = [scores[c.doc_id] for c in candidates]
        golden_index = next(i for i, c in enumerate(candidates) if c.doc_id == golden.doc_id)
        position, instance_ties = _golden_position(ordered_scores, golden_index)
        positions.append(position)
        ties += instance_ties
    if not positions:
        raise ValueError("corpus has no labeled knowledge-seeking dialogs to evaluate")
    _warn_ties(ties, "tfidf evaluation")
    return selection_metrics(positions)


def evaluate_detector(model: DetectorModel, corpus: Corpus) -> DetectionMetrics:
    """Detection metrics of the model's triggered decisions against target labels."""
    if not corpus.dialogs:
        raise ValueError("corpus has no dialogs")
    predictions = [detect(model, dialog).triggered for dialog in corpus.dialogs]
    gold = [dialog.target for dialog in corpus.dialogs]
    return detection_metrics(predictions, gold)


@dataclass(frozen=True)
class ReportEntry:
    """Metrics for one model label; either metrics block may be absent."""

    model: str
    detection: DetectionMetrics | None = None
    selection: SelectionMetrics | None = None


def _entry_payload(entry: ReportEntry) -> dict:
    payload: dict = {"model": entry.model, "detection": None, "selection": None}
    if entry.detection is not None:
        d = entry.detection
        payload["detection"] = {
            "precision": d.precision,
            "recall": d.recall,
            "f1": d.f1,
            "counts": d.counts,
        }
    if entry.selection is not None:
        s = entry.selection
        payload["selection"] = {
            "acc_at_1": s.acc_at_1,
            "acc_at_5": s.acc_at_5,
            "mrr_at_5": s.mrr_at_5,
            "n_instances": s.n_instances,
        }
    return payload


def report(entries: list[ReportEntry], fmt: str = "json", stamp: str | None = None) -> str:
    """Render entries as a JSON document or a pair of markdown tables.

    Output is deterministic; a stamp line appears only when ``stamp`` is
    given.
    """
    if fmt == "json":
        payload: object = [_entry_payload(e) for e in entries]
        if stamp is not None:
            payload = {"stamp": stamp, "results": payload}
        return json.dumps(payload, indent=2) + "\n"
    if fmt != "md":
        raise ValueError(f"format must be 'json' or 'md', got {fmt!r}")

    lines = []
    if stamp is not None:
        lines.append(f"<!-- {stamp} -->")
        lines.append("")
    lines.append("## Detection")
    lines.append("| Model | Recall | Precision | F1 |")
    lines.append("| --- | --- | --- | --- |")
    for entry in entries:
        if entry.detection is not None:
            d = entry.detection
            lines.append(f"| {entry.model} | {d.recall:.4f} | {d.precision:.4f} | {d.f1:.4f} |")
    lines.append("")
    lines.append("## Selection")
    lines.append("| Model | Acc@5 | Acc@1 | MRR@5 |")
    lines.append("| --- | --- | --- | --- |")
    for entry in entries:
        if entry.selection is not None:
            s = entry.selection
            lines.append(
                f"| {entry.model} | {s.acc_at_5:.4f} | {s.acc_at_1:.4f} | {s.mrr_at_5:.4f} |"
            )
    return "\n".join(lines) + "\n"
