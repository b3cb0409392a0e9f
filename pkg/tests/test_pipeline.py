import pytest

from complerank.agents import AgentKind, TransportError, mock_agent
from complerank.catalog import QueryInstance, split_holdout
from complerank.pipeline import (
    PRESETS,
    STAGE_BASE,
    STAGE_DIVERSITY,
    STAGE_FINAL,
    PipelineConfig,
    constant_transport,
    rerank_stage,
    run_all,
    run_pipeline,
)
from complerank.retriever import HeuristicRetriever, RetrievalError
from complerank.synth import SynthConfig, generate


def make_config(div="identity", acc="identity", n_div=4, n_acc=2, cutoffs=(1, 2), **mock_kwargs):
    return PipelineConfig(
        diversity_transport=constant_transport(mock_agent(div, **mock_kwargs)),
        accuracy_transport=constant_transport(mock_agent(acc, **mock_kwargs)),
        n_div=n_div,
        n_acc=n_acc,
        cutoffs=cutoffs,
    )


class TestPipelineConfig:
    def test_presets(self):
        assert PRESETS["fig1"] == (50, 25)
        assert PRESETS["fig2"] == (100, 50)

    def test_n_acc_bounded_by_n_div(self):
        with pytest.raises(ValueError):
            make_config(n_div=10, n_acc=20)

    def test_cutoffs_bounded_by_n_acc(self):
        with pytest.raises(ValueError):
            make_config(n_div=10, n_acc=5, cutoffs=(1, 10))


class TestRerankStage:
    def test_identity(self, prompt_fixture):
        query, candidates = prompt_fixture
        outcome = rerank_stage(query, candidates, AgentKind.DIVERSITY, mock_agent("identity"))
        assert outcome.ranked.order == [item.id for item in candidates]
        assert outcome.ranked.stage == STAGE_DIVERSITY
        assert not outcome.failed

    def test_reverse(self, prompt_fixture):
        query, candidates = prompt_fixture
        outcome = rerank_stage(query, candidates[:3], AgentKind.ACCURACY, mock_agent("reverse"))
        assert outcome.ranked.order == ["c3", "c2", "c1"]
        assert outcome.ranked.stage == STAGE_FINAL

    def test_oracle(self, prompt_fixture):
        query, candidates = prompt_fixture
        transport = mock_agent("oracle", ground_truth={"c2"})
        outcome = rerank_stage(query, candidates[:3], AgentKind.DIVERSITY, transport)
        assert outcome.ranked.order == ["c2", "c1", "c3"]

    def test_transport_error_propagates(self, prompt_fixture):
        query, candidates = prompt_fixture

        def broken(bundle):
            raise TransportError("down")

        with pytest.raises(TransportError):
            rerank_stage(query, candidates, AgentKind.DIVERSITY, broken)

    def test_empty_candidates_rejected(self, prompt_fixture):
        query, _ = prompt_fixture
        with pytest.raises(ValueError):
            rerank_stage(query, [], AgentKind.DIVERSITY, mock_agent("identity"))


@pytest.fixture
def split_setup(tiny_graph):
    train, queries = split_holdout(tiny_graph, 0.5, seed=7)
    retriever = HeuristicRetriever(train, exclude_neighbors=False)
    return train, queries, retriever


class TestRunPipeline:
    def test_identity_stages_track_base(self, split_setup):
        train, queries, retriever = split_setup
        config = make_config(n_div=4, n_acc=2)
        result = run_pipeline(queries[0], retriever, train.items, config)
        assert result.base.stage == STAGE_BASE
        assert result.diversity.ranked.order == result.base.order
        assert result.final.ranked.order == result.base.order[:2]

    def test_small_pool_uses_whole_pool(self, split_setup):
        train, queries, retriever = split_setup
        config = make_config(n_div=50, n_acc=25, cutoffs=(1, 3))
        result = run_pipeline(queries[0], retriever, train.items, config)
        assert len(result.base.order) == 5  # 6 items minus the query
        assert len(result.final.ranked.order) == 5

    def test_conservation(self, split_setup):
        train, queries, retriever = split_setup
        config = make_config(div="reverse", acc="reverse", n_div=4, n_acc=3)
        result = run_pipeline(queries[0], retriever, train.items, config)
        assert sorted(result.diversity.ranked.order) == sorted(result.base.order)
        assert sorted(result.final.ranked.order) == sorted(result.diversity.ranked.order[:3])

    def test_stage_isolation_under_shuffle(self, split_setup):
        train, queries, retriever = split_setup
        config = PipelineConfig(
            diversity_transport=constant_transport(mock_agent("seeded_shuffle", seed=5)),
            accuracy_transport=constant_transport(mock_agent("seeded_shuffle", seed=9)),
            n_div=4,
            n_acc=2,
            cutoffs=(1, 2),
        )
        result = run_pipeline(queries[0], retriever, train.items, config)
        truncated_away = set(result.diversity.ranked.order[2:])
        assert not truncated_away & set(result.final.ranked.order)

    def test_oracle_puts_truth_at_head(self, split_setup):
        train, queries, retriever = split_setup
        query = queries[0]
        config = PipelineConfig(
            diversity_transport=lambda q: mock_agent("oracle", ground_truth=q.ground_truth),
            accuracy_transport=lambda q: mock_agent("oracle", ground_truth=q.ground_truth),
            n_div=5,
            n_acc=3,
            cutoffs=(1, 3),
        )
        result = run_pipeline(query, retriever, train.items, config)
        reachable = [i for i in result.base.order if i in query.ground_truth]
        assert result.diversity.ranked.order[: len(reachable)] == reachable

    def test_transport_failure_falls_back_to_identity(self, split_setup):
        train, queries, retriever = split_setup

        def broken(bundle):
            raise TransportError("down")

        config = PipelineConfig(
            diversity_transport=constant_transport(broken),
            accuracy_transport=constant_transport(mock_agent("identity")),
            n_div=4,
            n_acc=2,
            cutoffs=(1, 2),
        )
        result = run_pipeline(queries[0], retriever, train.items, config)
        assert result.diversity.failed
        assert result.diversity.ranked.order == result.base.order
        assert not result.final.failed
        assert result.final.ranked.order == result.base.order[:2]

    def test_no_duplicates_and_query_excluded(self, split_setup):
        train, queries, retriever = split_setup
        config = make_config(div="reverse", acc="reverse", n_div=5, n_acc=3, cutoffs=(1, 3))
        for query in queries:
            result = run_pipeline(query, retriever, train.items, config)
            for ranked in result.lists():
                assert len(set(ranked.order)) == len(ranked.order)
                assert query.query_id not in ranked.order

    def test_unservable_query_raises(self, split_setup):
        train, _, retriever = split_setup
        ghost = QueryInstance(query_id="ghost", ground_truth=frozenset({"a1"}))
        with pytest.raises(RetrievalError, match="ghost"):
            run_pipeline(ghost, retriever, train.items, make_config())


class TestRunAll:
    def test_preserves_query_order(self, split_setup):
        train, queries, retriever = split_setup
        results = run_all(queries, retriever, train.items, make_config())
        assert [r.query_id for r in results] == [q.query_id for q in queries]

    def test_concurrency_matches_sequential(self):
        graph, _ = generate(SynthConfig(n_items=60, n_genres=3, edges_per_item=3.0, seed=8))
        train, queries = split_holdout(graph, 0.25, seed=2)
        retriever = HeuristicRetriever(train)
        config = PipelineConfig(
            diversity_transport=constant_transport(mock_agent("seeded_shuffle", seed=1)),
            accuracy_transport=constant_transport(mock_agent("seeded_shuffle", seed=2)),
            n_div=10,
            n_acc=5,
            cutoffs=(1, 5),
        )
        sequential = run_all(queries, retriever, train.items, config, concurrency=1)
        parallel = run_all(queries, retriever, train.items, config, concurrency=4)
        assert [r.final.ranked.order for r in sequential] == [
            r.final.ranked.order for r in parallel
        ]
