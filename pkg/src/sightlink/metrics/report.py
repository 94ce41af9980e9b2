"""Per-category metric aggregation and report rendering.

Rows follow the reporting layout of the evaluated system: Navigation,
Distance Estimation, Relationships; columns BLEU-1, BLEU-2, ROUGE, CIDEr,
METEOR.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any

from ..dataset import Category, QAEntry
from . import scores
from .text import TOKENIZER_VERSION, tokenize

logger = logging.getLogger(__name__)

ROW_LABELS = {
    Category.NAVIGATIONAL_GUIDANCE: "Navigation",
    Category.DISTANCE_PROXIMITY: "Distance Estimation",
    Category.SPATIAL_RELATIONSHIPS: "Relationships",
}

METRIC_KEYS = ("bleu1", "bleu2", "rouge", "cider", "meteor")
METRIC_HEADERS = ("BLEU-1", "BLEU-2", "ROUGE", "CIDEr", "METEOR")


@dataclass
class MetricReport:
    """Category rows in fixed order plus corpus metadata."""

    rows: dict[str, dict[str, float]]
    corpus_meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {label: dict(row) for label, row in self.rows.items()}
        out["meta"] = self.corpus_meta
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_table(self) -> str:
        label_width = max([len("Category")] + [len(label) for label in self.rows])
        header = "Category".ljust(label_width) + "".join(
            f"{h:>10}" for h in METRIC_HEADERS
        )
        lines = [header, "-" * len(header)]
        for label, row in self.rows.items():
            cells = "".join(f"{row[key]:>10.3f}" for key in METRIC_KEYS)
            lines.append(label.ljust(label_width) + cells)
        return "\n".join(lines) + "\n"


def score_corpus(entries: list[QAEntry], cider_scale: float = 1.0) -> MetricReport:
    """Scores model answers against ground truths, grouped by category.

    BLEU/ROUGE/METEOR are macro means over the items of each category; CIDEr
    uses the whole corpus as IDF base before the same macro averaging. A
    per-item failure (empty answer, tokenizer wipeout) scores 0 on every
    metric and is counted as a diagnostic rather than aborting the run.
    """
    by_category: dict[Category, list[QAEntry]] = {c: [] for c in Category}
    for entry in entries:
        by_category[entry.category].append(entry)

    diagnostics = 0
    cider_candidates: dict[str, list[str]] = {}
    cider_references: dict[str, list[list[str]]] = {}
    keys: dict[int, str] = {}
    for i, entry in enumerate(entries):
        key = f"{entry.image_file}#{entry.category.value}"
        keys[id(entry)] = key
        cider_candidates[key] = tokenize(entry.model_answer or "")
        cider_references[key] = [tokenize(entry.ground_truth)]

    valid_refs = {k for k, refs in cider_references.items() if refs[0]}
    cider_scores: dict[str, float] = {}
    if valid_refs:
        cider_scores, _ = scores.cider(
            {k: cider_candidates[k] for k in valid_refs},
            {k: cider_references[k] for k in valid_refs},
            scale=cider_scale,
        )

    rows: dict[str, dict[str, float]] = {}
    item_counts: dict[str, int] = {}
    empty_categories: list[str] = []
    for category in Category:
        label = ROW_LABELS[category]
        group = by_category[category]
        if not group:
            empty_categories.append(label)
            continue
        sums = {key: 0.0 for key in METRIC_KEYS}
        for entry in group:
            candidate = tokenize(entry.model_answer or "")
            reference = tokenize(entry.ground_truth)
            key = keys[id(entry)]
            try:
                if not candidate or not reference:
                    raise scores.EmptyCandidateError(key)
                sums["bleu1"] += scores.bleu_n(candidate, [reference], 1)
                sums["bleu2"] += scores.bleu_n(candidate, [reference], 2)
                sums["rouge"] += scores.rouge_l(candidate, reference)
                sums["meteor"] += scores.meteor(candidate, reference)
                sums["cider"] += cider_scores.get(key, 0.0)
            except scores.MetricError:
                diagnostics += 1
                logger.warning("item %s not scorable, counted as 0", key)
        n = len(group)
        rows[label] = {key: sums[key] / n for key in METRIC_KEYS}
        item_counts[label] = n

    meta: dict[str, Any] = {
        "items": item_counts,
        "diagnostics": diagnostics,
        "rouge_variant": "rouge-l-f1",
        "meteor_stages": "exact+stem",
        "cider_scale": cider_scale,
        "cider_max_n": 4,
        "tokenizer": TOKENIZER_VERSION,
        "references_per_item": 1,
    }
    if empty_categories:
        meta["empty_categories"] = empty_categories
    return MetricReport(rows=rows, corpus_meta=meta)
