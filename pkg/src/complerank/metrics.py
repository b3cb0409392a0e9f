"""Ranking metrics: Hit@K, NDCG@K, title-token entropy, vocabulary size, lift.

Accuracy metrics use binary relevance against a per-query ground-truth set.
NDCG discounts by log2 of the 1-based position and normalizes by the ideal
ordering's gain over ``min(|ground truth|, K)`` positions, which makes
NDCG@1 coincide exactly with Hit@1.

Diversity metrics pool the tokens of the top-K recommended titles:
entropy is Shannon entropy in nats of the pooled token distribution,
vocabulary is the count of distinct tokens.  Tokens come from lowercasing
and splitting on runs of non-alphanumeric characters.

Per-query values are averaged (unweighted) into per-method rows; lift is the
percent change of an enhanced stage over a baseline, aggregated across
retrievers with a standard error.
"""

from __future__ import annotations

import csv
import json
import math
import re
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .pipeline import STAGE_BASE, STAGE_DIVERSITY, STAGE_FINAL, QueryResult

METRIC_NAMES = ("hit", "ndcg", "entropy", "vocab")

# (name, enhanced stage, baseline stage) in report order.
COMPARISONS = (
    ("overall_vs_base", STAGE_FINAL, STAGE_BASE),
    ("diversity_vs_base", STAGE_DIVERSITY, STAGE_BASE),
    ("final_vs_diversity", STAGE_FINAL, STAGE_DIVERSITY),
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(title: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(title.lower())


def hit_at_k(order: Sequence[str], ground_truth: frozenset[str] | set[str], k: int) -> int:
    """1 iff any ground-truth id appears in the first min(k, len(order)) positions."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not ground_truth:
        raise ValueError("ground truth must be nonempty")
    return int(any(item_id in ground_truth for item_id in order[:k]))


def ndcg_at_k(order: Sequence[str], ground_truth: frozenset[str] | set[str], k: int) -> float:
    """Binary-relevance NDCG at cutoff k, in [0, 1]."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not ground_truth:
        raise ValueError("ground truth must be nonempty")
    dcg = 0.0
    for position, item_id in enumerate(order[:k], start=1):
        if item_id in ground_truth:
            dcg += 1.0 / math.log2(position + 1)
    ideal_hits = min(len(ground_truth), k)
    idcg = sum(1.0 / math.log2(position + 1) for position in range(1, ideal_hits + 1))
    return dcg / idcg


def entropy_at_k(titles: Iterable[str]) -> float:
    """Shannon entropy (nats) of the token distribution pooled over titles."""
    counts: dict[str, int] = {}
    for title in titles:
        for token in tokenize(title):
            counts[token] = counts.get(token, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -math.fsum((c / total) * math.log(c / total) for c in counts.values())


def vocab_at_k(titles: Iterable[str]) -> int:
    """Number of distinct tokens across the given titles."""
    vocabulary: set[str] = set()
    for title in titles:
        vocabulary.update(tokenize(title))
    return len(vocabulary)


@dataclass
class PerQueryRow:
    """One query's metrics for one stage at one cutoff."""

    query_id: str
    stage: str
    k: int
    hit: int
    ndcg: float
    entropy: float
    vocab: int


@dataclass
class MetricsRow:
    """Per-method (retriever, stage) means over queries at one cutoff."""

    retriever: str
    stage: str
    dataset: str
    k: int
    hit: float
    ndcg: float
    entropy: float
    vocab: float


@dataclass
class LiftRow:
    """Percent change of one metric between two stages, with cross-retriever spread."""

    metric: str
    dataset: str
    k: int
    comparison: str
    mean_lift_pct: float | None
    std_err: float | None
    n_retrievers: int


def evaluate_ranking(
    query_id: str,
    stage: str,
    order: Sequence[str],
    ground_truth: frozenset[str] | set[str],
    titles_by_id: Mapping[str, str],
    cutoffs: Sequence[int],
) -> list[PerQueryRow]:
    """All four metrics for one ranked list at every cutoff."""
    rows = []
    for k in sorted(cutoffs):
        top_titles = [titles_by_id[item_id] for item_id in order[:k]]
        rows.append(
            PerQueryRow(
                query_id=query_id,
                stage=stage,
                k=k,
                hit=hit_at_k(order, ground_truth, k),
                ndcg=ndcg_at_k(order, ground_truth, k),
                entropy=entropy_at_k(top_titles),
                vocab=vocab_at_k(top_titles),
            )
        )
    return rows


def evaluate_results(
    results: Iterable[QueryResult],
    ground_truth: Mapping[str, frozenset[str]],
    titles_by_id: Mapping[str, str],
    cutoffs: Sequence[int],
) -> list[PerQueryRow]:
    """Per-query rows for all three stages of every pipeline result."""
    rows: list[PerQueryRow] = []
    for result in results:
        truth = ground_truth[result.query_id]
        for ranked in result.lists():
            rows.extend(
                evaluate_ranking(
                    result.query_id, ranked.stage, ranked.order, truth, titles_by_id, cutoffs
                )
            )
    return rows


def aggregate(
    rows: Sequence[PerQueryRow],
    retriever: str,
    stage: str,
    dataset: str,
    cutoffs: Sequence[int],
) -> list[MetricsRow]:
    """Unweighted per-cutoff means over queries for one (retriever, stage) method."""
    stage_rows = [row for row in rows if row.stage == stage]
    if not stage_rows:
        raise ValueError(f"no per-query rows for stage {stage!r}")
    out = []
    for k in sorted(cutoffs):
        at_k = [row for row in stage_rows if row.k == k]
        if not at_k:
            raise ValueError(f"no per-query rows for stage {stage!r} at k={k}")
        n = len(at_k)
        out.append(
            MetricsRow(
                retriever=retriever,
                stage=stage,
                dataset=dataset,
                k=k,
                hit=sum(row.hit for row in at_k) / n,
                ndcg=sum(row.ndcg for row in at_k) / n,
                entropy=sum(row.entropy for row in at_k) / n,
                vocab=sum(row.vocab for row in at_k) / n,
            )
        )
    return out


def lift(enhanced: MetricsRow, base: MetricsRow) -> dict[str, float | None]:
    """Percent change per metric: 100 * (enhanced - base) / base.

    A zero base makes the lift undefined; it is reported as ``None`` rather
    than infinity.
    """
    if enhanced.dataset != base.dataset or enhanced.k != base.k:
        raise ValueError("lift requires rows for the same dataset and cutoff")
    out: dict[str, float | None] = {}
    for metric in METRIC_NAMES:
        base_value = getattr(base, metric)
        enhanced_value = getattr(enhanced, metric)
        out[metric] = None if base_value == 0 else 100.0 * (enhanced_value - base_value) / base_value
    return out


def lift_with_stderr(lifts: Sequence[float]) -> tuple[float, float]:
    """Mean lift and its standard error (sample sd / sqrt(n)) across retrievers.

    A single value yields std_err 0 by convention; callers should surface the
    degenerate count (see ``LiftRow.n_retrievers``).
    """
    if not lifts:
        raise ValueError("cannot aggregate an empty list of lifts")
    mean = math.fsum(lifts) / len(lifts)
    if len(lifts) < 2:
        return mean, 0.0
    return mean, statistics.stdev(lifts) / math.sqrt(len(lifts))


def _rows_by_stage_k(rows: Sequence[MetricsRow]) -> dict[tuple[str, int], MetricsRow]:
    indexed: dict[tuple[str, int], MetricsRow] = {}
    for row in rows:
        key = (row.stage, row.k)
        if key in indexed:
            raise ValueError(f"duplicate metrics row for stage {row.stage!r} at k={row.k}")
        indexed[key] = row
    return indexed


def lift_rows_for_runs(
    rows_by_retriever: Mapping[str, Sequence[MetricsRow]],
    dataset: str,
    cutoffs: Sequence[int],
) -> list[LiftRow]:
    """Lift table over one or more retrievers.

    Each retriever's lift is computed against its own baseline stage, then
    averaged across retrievers with a standard error.  Retrievers whose base
    value is zero for a metric drop out of that metric's aggregate (tracked
    by ``n_retrievers``).
    """
    indexed = {
        name: _rows_by_stage_k(rows) for name, rows in sorted(rows_by_retriever.items())
    }
    out: list[LiftRow] = []
    for comparison, enhanced_stage, base_stage in COMPARISONS:
        for metric in METRIC_NAMES:
            for k in sorted(cutoffs):
                values: list[float] = []
                for name in sorted(indexed):
                    per_metric = lift(indexed[name][(enhanced_stage, k)], indexed[name][(base_stage, k)])
                    if per_metric[metric] is not None:
                        values.append(per_metric[metric])
                if values:
                    mean, std_err = lift_with_stderr(values)
                else:
                    mean, std_err = None, None
                out.append(
                    LiftRow(
                        metric=metric,
                        dataset=dataset,
                        k=k,
                        comparison=comparison,
                        mean_lift_pct=mean,
                        std_err=std_err,
                        n_retrievers=len(values),
                    )
                )
    return out


def write_metrics_csv(rows: Sequence[MetricsRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "stage", "k", "hit", "ndcg", "entropy", "vocab"])
        for row in rows:
            writer.writerow(
                [row.retriever, row.dataset, row.stage, row.k, row.hit, row.ndcg, row.entropy, row.vocab]
            )


def write_lift_csv(rows: Sequence[LiftRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["metric", "dataset", "k", "comparison", "mean_lift_pct", "std_err", "n_retrievers"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.metric,
                    row.dataset,
                    row.k,
                    row.comparison,
                    "" if row.mean_lift_pct is None else row.mean_lift_pct,
                    "" if row.std_err is None else row.std_err,
                    row.n_retrievers,
                ]
            )


def rows_to_dicts(rows: Sequence) -> list[dict]:
    return [asdict(row) for row in rows]


def write_json(payload: object, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
