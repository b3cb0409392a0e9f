"""Command-line entry point: ``synth``, ``run`` and ``report`` subcommands.

``synth`` writes a synthetic dataset; ``run`` executes split + retrieval +
three-stage reranking + evaluation for one retriever into an output
directory; ``report`` merges several runs (one per retriever) into a combined
metrics table and a cross-retriever lift table with standard errors.

``run`` is driven by a JSON config file (key set documented in the README)
with CLI flags as overrides.  Runs with mock agents are fully deterministic:
the same config yields byte-identical CSV outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import agents, catalog, metrics, pipeline, retriever, synth

RUN_CONFIG_FILE = "run_config.json"
RETRIEVAL_FILE = "retrieval.jsonl"
STAGES_FILE = "stages.jsonl"
PER_QUERY_FILE = "per_query.jsonl"
METRICS_CSV = "metrics.csv"
METRICS_JSON = "metrics.json"
LIFT_CSV = "lift.csv"
LIFT_JSON = "lift.json"
AUDIT_FILE = "audit.jsonl"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
LIFT_REPORT_CSV = "lift_report.csv"
LIFT_REPORT_JSON = "lift_report.json"

_STAGE_ORDER = {stage: index for index, stage in enumerate(pipeline.STAGES)}


def _load_json(path: str | Path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: expected a JSON object at top level")
    return loaded


def _resolve_dataset(cfg: dict, out_dir: Path) -> tuple[catalog.ComplementGraph, str]:
    dataset = cfg.get("dataset")
    if not dataset:
        raise ValueError("config is missing the 'dataset' section")
    if "synth" in dataset:
        synth_cfg = synth.SynthConfig(**dataset["synth"])
        graph, genre_of = synth.generate(synth_cfg)
        synth.write_dataset(graph, genre_of, out_dir / "dataset")
        return graph, dataset.get("name", "synth")
    try:
        items_path = dataset["items"]
        edges_path = dataset["edges"]
    except KeyError as exc:
        raise ValueError(f"dataset section needs either 'synth' or both 'items' and 'edges' ({exc})")
    graph = catalog.load_catalog(items_path, edges_path)
    return graph, dataset.get("name", Path(items_path).stem)


def _build_retriever(cfg: dict, train: catalog.ComplementGraph) -> pipeline.Retriever:
    kind = cfg.get("kind", "heuristic")
    if kind == "heuristic":
        weights_cfg = cfg.get("weights", {})
        weights = retriever.ScoreWeights(
            category=float(weights_cfg.get("category", 1.0)),
            price=float(weights_cfg.get("price", 1.0)),
        )
        return retriever.HeuristicRetriever(
            train,
            weights=weights,
            exclude_neighbors=bool(cfg.get("exclude_neighbors", True)),
            name=cfg.get("name", "heuristic"),
        )
    if kind == "precomputed":
        path = cfg.get("path")
        if not path:
            raise ValueError("precomputed retriever requires a 'path' to a scores file")
        if not Path(path).exists():
            raise ValueError(f"scores file not found: {path}")
        return retriever.PrecomputedRetriever(path, name=cfg.get("name"))
    raise ValueError(f"unknown retriever kind {kind!r} (expected heuristic or precomputed)")


def _transport_factory(agents_cfg: dict, stage: str) -> tuple[pipeline.TransportFactory, dict]:
    merged = {k: v for k, v in agents_cfg.items() if k not in ("diversity", "accuracy")}
    merged.update(agents_cfg.get(stage, {}))
    policy = merged.get("mock")
    if policy and merged.get("endpoint"):
        raise ValueError(f"agent config for {stage!r} sets both 'mock' and 'endpoint'")
    if policy:
        if policy in ("identity", "reverse"):
            return pipeline.constant_transport(agents.mock_agent(policy)), {"mock": policy}
        if policy.startswith("shuffle:"):
            seed = int(policy.split(":", 1)[1])
            return (
                pipeline.constant_transport(agents.mock_agent("seeded_shuffle", seed=seed)),
                {"mock": policy},
            )
        if policy == "oracle":
            factory = lambda query: agents.mock_agent("oracle", ground_truth=query.ground_truth)
            return factory, {"mock": policy}
        raise ValueError(f"unknown mock policy {policy!r}")
    endpoint = merged.get("endpoint")
    if not endpoint:
        raise ValueError(f"agent config for {stage!r} needs either 'mock' or 'endpoint'")
    if not merged.get("model"):
        raise ValueError("endpoint transport requires a 'model' name")
    llm = agents.LlmConfig(
        base_url=endpoint,
        model=merged["model"],
        api_key_env=merged.get("api_key_env", "OPENAI_API_KEY"),
        temperature=float(merged.get("temperature", 0.0)),
        max_retries=int(merged.get("max_retries", 3)),
        timeout=float(merged.get("timeout", 30.0)),
    )
    desc = {"endpoint": endpoint, "model": merged["model"]}
    return pipeline.constant_transport(agents.http_transport(llm)), desc


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def cmd_synth(config: synth.SynthConfig, out_dir: str | Path) -> tuple[Path, Path, Path]:
    graph, genre_of = synth.generate(config)
    paths = synth.write_dataset(graph, genre_of, out_dir)
    for path in paths:
        print(path)
    return paths


def cmd_run(cfg: dict) -> Path:
    out = cfg.get("out")
    if not out:
        raise ValueError("no output directory: set 'out' in the config or pass --out")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    graph, dataset_name = _resolve_dataset(cfg, out_dir)
    split_cfg = cfg.get("split", {})
    holdout = float(split_cfg.get("holdout_fraction", 0.2))
    seed = int(split_cfg.get("seed", 0))
    train, queries = catalog.split_holdout(graph, holdout, seed)

    retr = _build_retriever(cfg.get("retriever", {}), train)

    pipe_cfg = cfg.get("pipeline", {})
    preset = pipe_cfg.get("preset")
    if preset:
        if preset not in pipeline.PRESETS:
            raise ValueError(f"unknown preset {preset!r} (expected one of {sorted(pipeline.PRESETS)})")
        n_div, n_acc = pipeline.PRESETS[preset]
    else:
        n_div = int(pipe_cfg.get("n_div", 50))
        n_acc = int(pipe_cfg.get("n_acc", 25))
    cutoffs = tuple(int(k) for k in pipe_cfg.get("cutoffs", [1, 3, 5, 10]))

    agents_cfg = cfg.get("agents", {})
    div_factory, div_desc = _transport_factory(agents_cfg, "diversity")
    acc_factory, acc_desc = _transport_factory(agents_cfg, "accuracy")
    config = pipeline.PipelineConfig(
        diversity_transport=div_factory,
        accuracy_transport=acc_factory,
        n_div=n_div,
        n_acc=n_acc,
        cutoffs=cutoffs,
    )

    audit = cfg.get("audit")
    if audit is None:
        audit = "endpoint" in div_desc or "endpoint" in acc_desc

    concurrency = int(cfg.get("concurrency", 1))
    results = pipeline.run_all(queries, retr, train.items, config, concurrency=concurrency)

    ground_truth = {q.query_id: q.ground_truth for q in queries}
    titles_by_id = {item_id: item.title for item_id, item in train.items.items()}
    per_query_rows = metrics.evaluate_results(results, ground_truth, titles_by_id, cutoffs)
    metrics_rows = []
    for stage in pipeline.STAGES:
        metrics_rows.extend(metrics.aggregate(per_query_rows, retr.name, stage, dataset_name, cutoffs))
    lift_rows = metrics.lift_rows_for_runs({retr.name: metrics_rows}, dataset_name, cutoffs)

    metrics.write_json(
        {
            "dataset": dataset_name,
            "retriever": retr.name,
            "n_queries": len(queries),
            "holdout_fraction": holdout,
            "seed": seed,
            "n_div": n_div,
            "n_acc": n_acc,
            "cutoffs": list(cutoffs),
            "agents": {"diversity": div_desc, "accuracy": acc_desc},
            "concurrency": concurrency,
        },
        out_dir / RUN_CONFIG_FILE,
    )
    _write_jsonl(
        out_dir / RETRIEVAL_FILE,
        [
            {
                "query_id": r.query_id,
                "source": r.retrieval.source,
                "ground_truth": sorted(ground_truth[r.query_id]),
                "candidates": [[item_id, score] for item_id, score in r.retrieval.candidates],
            }
            for r in results
        ],
    )
    stage_records = []
    audit_records = []
    for r in results:
        for ranked, outcome in (
            (r.base, None),
            (r.diversity.ranked, r.diversity),
            (r.final.ranked, r.final),
        ):
            stage_records.append(
                {
                    "query_id": ranked.query_id,
                    "stage": ranked.stage,
                    "order": list(ranked.order),
                    "repairs": sorted(outcome.repairs) if outcome else [],
                    "failed": outcome.failed if outcome else False,
                }
            )
            if outcome is not None and audit:
                audit_records.append(
                    {
                        "query_id": ranked.query_id,
                        "stage": ranked.stage,
                        "prompt": outcome.prompt,
                        "response": outcome.response,
                        "repairs": sorted(outcome.repairs),
                        "failed": outcome.failed,
                    }
                )
    _write_jsonl(out_dir / STAGES_FILE, stage_records)
    if audit:
        _write_jsonl(out_dir / AUDIT_FILE, audit_records)
    _write_jsonl(out_dir / PER_QUERY_FILE, metrics.rows_to_dicts(per_query_rows))
    metrics.write_metrics_csv(metrics_rows, out_dir / METRICS_CSV)
    metrics.write_json(
        {
            "dataset": dataset_name,
            "retriever": retr.name,
            "cutoffs": list(cutoffs),
            "rows": metrics.rows_to_dicts(metrics_rows),
        },
        out_dir / METRICS_JSON,
    )
    metrics.write_lift_csv(lift_rows, out_dir / LIFT_CSV)
    metrics.write_json(
        {"dataset": dataset_name, "rows": metrics.rows_to_dicts(lift_rows)},
        out_dir / LIFT_JSON,
    )
    return out_dir


def cmd_report(run_dirs: list[str | Path], out_dir: str | Path) -> Path:
    if not run_dirs:
        raise ValueError("report needs at least one run directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    datasets: set[str] = set()
    cutoffs_seen: set[tuple[int, ...]] = set()
    rows_by_retriever: dict[str, list[metrics.MetricsRow]] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        payload = _load_json(run_dir / METRICS_JSON)
        datasets.add(payload["dataset"])
        cutoffs_seen.add(tuple(payload["cutoffs"]))
        name = payload["retriever"]
        if name in rows_by_retriever:
            raise ValueError(f"duplicate retriever name {name!r} across runs")
        rows_by_retriever[name] = [metrics.MetricsRow(**row) for row in payload["rows"]]

    if len(datasets) > 1:
        raise ValueError(f"runs cover different datasets: {sorted(datasets)}")
    if len(cutoffs_seen) > 1:
        raise ValueError(f"runs use different cutoffs: {sorted(cutoffs_seen)}")
    dataset = datasets.pop()
    cutoffs = list(cutoffs_seen.pop())

    combined = [
        row
        for name in sorted(rows_by_retriever)
        for row in sorted(rows_by_retriever[name], key=lambda r: (_STAGE_ORDER[r.stage], r.k))
    ]
    metrics.write_metrics_csv(combined, out / REPORT_CSV)
    metrics.write_json(
        {
            "dataset": dataset,
            "retrievers": sorted(rows_by_retriever),
            "cutoffs": cutoffs,
            "rows": metrics.rows_to_dicts(combined),
        },
        out / REPORT_JSON,
    )

    lift_rows = metrics.lift_rows_for_runs(rows_by_retriever, dataset, cutoffs)
    metrics.write_lift_csv(lift_rows, out / LIFT_REPORT_CSV)
    metrics.write_json(
        {"dataset": dataset, "rows": metrics.rows_to_dicts(lift_rows)},
        out / LIFT_REPORT_JSON,
    )
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complerank",
        description="Two-stage LLM reranking for complementary product recommendation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--items", type=int, required=True, help="number of items")
    p_synth.add_argument("--genres", type=int, default=4)
    p_synth.add_argument("--edges-per-item", type=float, default=3.0)
    p_synth.add_argument("--cross-ratio", type=float, default=0.3)
    p_synth.add_argument("--title-tokens-min", type=int, default=3)
    p_synth.add_argument("--title-tokens-max", type=int, default=8)
    p_synth.add_argument("--token-pool", type=int, default=40)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", default=".", help="output directory")

    p_run = sub.add_parser("run", help="run retrieval + reranking + evaluation")
    p_run.add_argument("--config", required=True, help="JSON run config (see README)")
    p_run.add_argument("--preset", choices=sorted(pipeline.PRESETS))
    p_run.add_argument("--retriever", choices=["heuristic", "precomputed"])
    p_run.add_argument("--scores", help="scores file for the precomputed retriever")
    p_run.add_argument("--mock", help="identity|reverse|shuffle:<seed>|oracle")
    p_run.add_argument("--endpoint", help="OpenAI-compatible chat-completions base URL")
    p_run.add_argument("--model", help="model name for the endpoint")
    p_run.add_argument("--seed", type=int, help="holdout split seed")
    p_run.add_argument("--holdout", type=float, help="holdout fraction in (0,1)")
    p_run.add_argument("--concurrency", type=int)
    p_run.add_argument("--audit", action=argparse.BooleanOptionalAction, default=None)
    p_run.add_argument("--out", help="output directory")

    p_report = sub.add_parser("report", help="merge runs into combined metric and lift tables")
    p_report.add_argument("run_dirs", nargs="+", help="run output directories")
    p_report.add_argument("--out", required=True, help="report output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            config = synth.SynthConfig(
                n_items=args.items,
                n_genres=args.genres,
                edges_per_item=args.edges_per_item,
                title_tokens_min=args.title_tokens_min,
                title_tokens_max=args.title_tokens_max,
                token_pool_per_genre=args.token_pool,
                cross_genre_edge_ratio=args.cross_ratio,
                seed=args.seed,
            )
            cmd_synth(config, args.out)
        elif args.command == "run":
            cfg = _load_json(args.config)
            if args.preset:
                cfg.setdefault("pipeline", {})["preset"] = args.preset
            if args.retriever:
                cfg.setdefault("retriever", {})["kind"] = args.retriever
            if args.scores:
                cfg.setdefault("retriever", {})["path"] = args.scores
            if args.mock:
                cfg["agents"] = {"mock": args.mock}
            if args.endpoint:
                cfg.setdefault("agents", {}).pop("mock", None)
                cfg["agents"]["endpoint"] = args.endpoint
            if args.model:
                cfg.setdefault("agents", {})["model"] = args.model
            if args.seed is not None:
                cfg.setdefault("split", {})["seed"] = args.seed
            if args.holdout is not None:
                cfg.setdefault("split", {})["holdout_fraction"] = args.holdout
            if args.concurrency is not None:
                cfg["concurrency"] = args.concurrency
            if args.audit is not None:
                cfg["audit"] = args.audit
            if args.out:
                cfg["out"] = args.out
            out_dir = cmd_run(cfg)
            print(out_dir)
        else:
            out_dir = cmd_report(args.run_dirs, args.out)
            print(out_dir)
    except (
        catalog.CatalogError,
        synth.SynthError,
        retriever.RetrievalError,
        agents.PromptError,
        agents.TransportError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
