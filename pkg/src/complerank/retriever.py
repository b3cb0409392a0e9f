"""Baseline relevance scoring and top-N candidate retrieval.

The reranking stages are agnostic of where relevance scores come from: any
source of per-pair scores can act as the retriever.  Two sources ship here:

  * a heuristic scorer (category-path overlap plus price proximity) that makes
    the pipeline self-contained on synthetic data, and
  * a precomputed-scores reader, so candidate lists exported from any external
    model (e.g. a trained GNN) can be plugged in unchanged.

Candidate lists are always normalized: unique ids, query excluded, scores
non-increasing, ties broken by ascending item id.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .catalog import ComplementGraph, Item


class RetrievalError(ValueError):
    """Unknown query, malformed scores file, or an unservable request."""


DEFAULT_RETRIEVAL_DEPTH = 50


@dataclass(frozen=True)
class ScoreWeights:
    category: float = 1.0
    price: float = 1.0


@dataclass
class CandidateList:
    """A query's retriever-ordered candidates with relevance scores."""

    query_id: str
    candidates: list[tuple[str, float]]
    source: str

    @property
    def ids(self) -> list[str]:
        return [item_id for item_id, _ in self.candidates]


def category_overlap(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    """Longest common category prefix over the longer path length, in [0, 1].

    Two empty paths share no evidence of relatedness and score 0.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    common = 0
    for level_a, level_b in zip(a, b):
        if level_a != level_b:
            break
        common += 1
    return common / longest


def score_pair(query: Item, candidate: Item, weights: ScoreWeights = ScoreWeights()) -> float:
    """Heuristic relevance score: higher means more likely complementary.

    ``weights.category * overlap + weights.price / (1 + |log(p_q / p_c)|)``,
    where the price term contributes 0 unless both prices are present and
    positive.
    """
    score = weights.category * category_overlap(query.categories, candidate.categories)
    if (
        query.price is not None
        and candidate.price is not None
        and query.price > 0
        and candidate.price > 0
    ):
        score += weights.price / (1.0 + abs(math.log(query.price / candidate.price)))
    return score


def _normalized(
    query_id: str, scored: list[tuple[str, float]], source: str
) -> CandidateList:
    best: dict[str, float] = {}
    for item_id, score in scored:
        if item_id == query_id:
            continue
        if item_id not in best or score > best[item_id]:
            best[item_id] = score
    ordered = sorted(best.items(), key=lambda pair: (-pair[1], pair[0]))
    return CandidateList(query_id=query_id, candidates=ordered, source=source)


def retrieve_heuristic(
    graph: ComplementGraph,
    query_id: str,
    n: int = DEFAULT_RETRIEVAL_DEPTH,
    weights: ScoreWeights = ScoreWeights(),
    exclude_neighbors: bool = True,
) -> CandidateList:
    """Top-n items by :func:`score_pair` against the query.

    ``exclude_neighbors`` drops items already linked to the query in the train
    graph, since those are known (not predicted) complements.  Returns fewer
    than n candidates when the pool is smaller.
    """
    if n < 1:
        raise RetrievalError(f"retrieval depth must be positive, got {n}")
    if query_id not in graph.items:
        raise RetrievalError(f"unknown query id {query_id!r}")
    query = graph.items[query_id]
    skip = {query_id}
    if exclude_neighbors:
        skip |= graph.neighbors(query_id)
    scored = [
        (item_id, score_pair(query, item, weights))
        for item_id, item in graph.items.items()
        if item_id not in skip
    ]
    ranked = _normalized(query_id, scored, source="heuristic")
    ranked.candidates = ranked.candidates[:n]
    return ranked


class PrecomputedScores:
    """Per-query ranked candidate lists loaded from a JSON Lines file.

    Each line is ``{"query_id": ..., "candidates": [[item_id, score], ...]}``.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lists: dict[str, list[tuple[str, float]]] = {}
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    query_id = record["query_id"]
                    pairs = [
                        (str(item_id), float(score)) for item_id, score in record["candidates"]
                    ]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise RetrievalError(f"{self.path}:{lineno}: malformed scores line ({exc})")
                self._lists[str(query_id)] = pairs

    def retrieve(self, query_id: str, n: int) -> CandidateList:
        if n < 1:
            raise RetrievalError(f"retrieval depth must be positive, got {n}")
        if query_id not in self._lists:
            raise RetrievalError(f"query {query_id!r} not present in {self.path}")
        ranked = _normalized(query_id, self._lists[query_id], source=self.path.stem)
        ranked.candidates = ranked.candidates[:n]
        return ranked


def retrieve_precomputed(scores_path: str | Path, query_id: str, n: int) -> CandidateList:
    """Read one query's stored list, re-sort to canonical order, truncate to n."""
    return PrecomputedScores(scores_path).retrieve(query_id, n)


class HeuristicRetriever:
    """Callable retriever over a train graph, tagged for result tables."""

    def __init__(
        self,
        graph: ComplementGraph,
        weights: ScoreWeights = ScoreWeights(),
        exclude_neighbors: bool = True,
        name: str = "heuristic",
    ):
        self.graph = graph
        self.weights = weights
        self.exclude_neighbors = exclude_neighbors
        self.name = name

    def retrieve(self, query_id: str, n: int) -> CandidateList:
        ranked = retrieve_heuristic(
            self.graph,
            query_id,
            n,
            weights=self.weights,
            exclude_neighbors=self.exclude_neighbors,
        )
        ranked.source = self.name
        return ranked


class PrecomputedRetriever:
    """Retriever backed by an exported scores file."""

    def __init__(self, path: str | Path, name: str | None = None):
        self.scores = PrecomputedScores(path)
        self.name = name or self.scores.path.stem

    def retrieve(self, query_id: str, n: int) -> CandidateList:
        ranked = self.scores.retrieve(query_id, n)
        ranked.source = self.name
        return ranked
