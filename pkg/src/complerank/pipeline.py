"""Three-stage reranking flow over a catalog of queries.

Per query: retrieve the top ``n_div`` candidates, let the diversity agent
rerank them, truncate to the top ``n_acc``, let the accuracy agent refine
those.  All three stage outputs (base / diversity / diversity_accuracy) are
kept so ablations can be evaluated side by side.

A transport failure that survives its retries does not abort the run: the
stage falls back to identity order and the query is flagged, keeping
evaluation denominators constant across methods.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .agents import (
    AgentKind,
    Transport,
    TransportError,
    build_prompt,
    parse_permutation,
)
from .catalog import Item, QueryInstance
from .retriever import CandidateList, RetrievalError

STAGE_BASE = "base"
STAGE_DIVERSITY = "diversity"
STAGE_FINAL = "diversity_accuracy"
STAGES = (STAGE_BASE, STAGE_DIVERSITY, STAGE_FINAL)

_STAGE_BY_KIND = {AgentKind.DIVERSITY: STAGE_DIVERSITY, AgentKind.ACCURACY: STAGE_FINAL}

# Named hyperparameter presets: (rerank depth n_div, refinement depth n_acc).
PRESETS = {"fig1": (50, 25), "fig2": (100, 50)}

# Factory so per-query transports (e.g. the oracle mock) can see the query.
TransportFactory = Callable[[QueryInstance], Transport]


def constant_transport(transport: Transport) -> TransportFactory:
    return lambda query: transport


class Retriever(Protocol):
    name: str

    def retrieve(self, query_id: str, n: int) -> CandidateList: ...


@dataclass
class PipelineConfig:
    diversity_transport: TransportFactory
    accuracy_transport: TransportFactory
    n_div: int = 50
    n_acc: int = 25
    cutoffs: tuple[int, ...] = (1, 3, 5, 10)

    def __post_init__(self) -> None:
        if self.n_div < 1 or self.n_acc < 1:
            raise ValueError("n_div and n_acc must be positive")
        if self.n_acc > self.n_div:
            raise ValueError(f"n_acc ({self.n_acc}) must not exceed n_div ({self.n_div})")
        if not self.cutoffs:
            raise ValueError("cutoffs must be nonempty")
        if any(k < 1 for k in self.cutoffs):
            raise ValueError("cutoffs must be positive")
        if max(self.cutoffs) > self.n_acc:
            raise ValueError(
                f"largest cutoff ({max(self.cutoffs)}) must not exceed n_acc ({self.n_acc})"
            )
        self.cutoffs = tuple(sorted(set(self.cutoffs)))


@dataclass
class RankedList:
    """An ordered recommendation list tagged with the stage that produced it."""

    query_id: str
    order: list[str]
    stage: str


@dataclass
class StageOutcome:
    """A reranked list plus parse-repair flags and transport bookkeeping."""

    ranked: RankedList
    repairs: frozenset[str] = field(default_factory=frozenset)
    failed: bool = False
    prompt: str | None = None
    response: str | None = None


@dataclass
class QueryResult:
    query_id: str
    retrieval: CandidateList
    base: RankedList
    diversity: StageOutcome
    final: StageOutcome

    def lists(self) -> tuple[RankedList, RankedList, RankedList]:
        return self.base, self.diversity.ranked, self.final.ranked


def rerank_stage(
    query: Item,
    candidates: Sequence[Item],
    kind: AgentKind,
    transport: Transport,
) -> StageOutcome:
    """Prompt the agent with ``candidates`` and map its permutation back to ids.

    The output is always a permutation of the input item ids.  Transport
    failures (after the transport's own retries) propagate as
    :class:`TransportError`.
    """
    if not candidates:
        raise ValueError(f"query {query.id!r}: cannot rerank an empty candidate list")
    bundle = build_prompt(query, candidates, kind)
    raw = transport(bundle)
    parsed = parse_permutation(raw, len(bundle.index_to_id))
    order = [bundle.index_to_id[k] for k in parsed.order]
    ranked = RankedList(query_id=query.id, order=order, stage=_STAGE_BY_KIND[kind])
    return StageOutcome(
        ranked=ranked,
        repairs=parsed.repairs,
        failed=False,
        prompt=bundle.text,
        response=raw,
    )


def _identity_fallback(query_id: str, items: Sequence[Item], kind: AgentKind, bundle_text: str | None) -> StageOutcome:
    ranked = RankedList(
        query_id=query_id, order=[item.id for item in items], stage=_STAGE_BY_KIND[kind]
    )
    return StageOutcome(ranked=ranked, failed=True, prompt=bundle_text, response=None)


def run_pipeline(
    query: QueryInstance,
    retriever: Retriever,
    items: Mapping[str, Item],
    config: PipelineConfig,
) -> QueryResult:
    """Run all three stages for one query.

    Stage order is strictly sequential (diversity before accuracy); the
    accuracy agent only ever sees the first ``n_acc`` survivors of the
    diversity list, so truncated items can never reappear.
    """
    retrieval = retriever.retrieve(query.query_id, config.n_div)
    if not retrieval.candidates:
        raise RetrievalError(f"query {query.query_id!r}: retriever returned no candidates")
    base = RankedList(query_id=query.query_id, order=retrieval.ids, stage=STAGE_BASE)
    query_item = items[query.query_id]

    div_items = [items[item_id] for item_id in base.order]
    try:
        diversity = rerank_stage(
            query_item, div_items, AgentKind.DIVERSITY, config.diversity_transport(query)
        )
    except TransportError:
        diversity = _identity_fallback(query.query_id, div_items, AgentKind.DIVERSITY, None)

    acc_items = [items[item_id] for item_id in diversity.ranked.order[: config.n_acc]]
    try:
        final = rerank_stage(
            query_item, acc_items, AgentKind.ACCURACY, config.accuracy_transport(query)
        )
    except TransportError:
        final = _identity_fallback(query.query_id, acc_items, AgentKind.ACCURACY, None)

    return QueryResult(
        query_id=query.query_id,
        retrieval=retrieval,
        base=base,
        diversity=diversity,
        final=final,
    )


def run_all(
    queries: Sequence[QueryInstance],
    retriever: Retriever,
    items: Mapping[str, Item],
    config: PipelineConfig,
    concurrency: int = 1,
) -> list[QueryResult]:
    """Process queries independently with a bounded in-flight limit.

    Results come back in input query order regardless of concurrency, so
    downstream writers stay deterministic.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be positive")
    if concurrency == 1 or len(queries) <= 1:
        return [run_pipeline(q, retriever, items, config) for q in queries]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(lambda q: run_pipeline(q, retriever, items, config), queries))
