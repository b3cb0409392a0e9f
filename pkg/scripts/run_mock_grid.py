#!/usr/bin/env python3
"""Desk-scale experiment grid: three retrievers, three stages, one report.

Generates a synthetic catalog, exports two seeded-random precomputed-scores
files as stand-ins for externally trained retrievers, runs the full pipeline
with mock agents for the heuristic retriever plus both precomputed ones, and
merges everything into the combined metrics table and the cross-retriever
lift table (mean and standard error over the three retrievers).

Everything is seeded: rerunning reproduces the same report byte for byte.

Usage: python scripts/run_mock_grid.py [WORKDIR]
"""

import json
import subprocess
import sys
from pathlib import Path

SPLIT = {"holdout_fraction": 0.2, "seed": 7}
MOCK = "shuffle:97"


def run(cmd: list[str]) -> None:
    print("+", " ".join(str(c) for c in cmd))
    subprocess.run([str(c) for c in cmd], check=True)


def main() -> None:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("mock_grid_out")
    dataset = workdir / "dataset"
    scripts = Path(__file__).parent

    run(
        [sys.executable, "-m", "complerank.cli", "synth",
         "--items", 600, "--genres", 4, "--edges-per-item", 4.0,
         "--cross-ratio", 0.25, "--seed", 6, "--out", dataset]
    )
    items, edges = dataset / "items.jsonl", dataset / "edges.jsonl"

    retrievers: dict[str, dict] = {
        "heuristic": {"kind": "heuristic", "name": "heuristic"},
    }
    for name, score_seed in (("gnnA", 101), ("gnnB", 202)):
        scores = workdir / f"{name}.jsonl"
        run(
            [sys.executable, scripts / "make_mock_scores.py",
             "--items", items, "--edges", edges,
             "--holdout", SPLIT["holdout_fraction"], "--split-seed", SPLIT["seed"],
             "--score-seed", score_seed, "--out", scores]
        )
        retrievers[name] = {"kind": "precomputed", "path": str(scores), "name": name}

    run_dirs = []
    for name, retr_cfg in retrievers.items():
        out = workdir / "runs" / name
        config = {
            "dataset": {"items": str(items), "edges": str(edges), "name": "synthgrid"},
            "split": SPLIT,
            "retriever": retr_cfg,
            "pipeline": {"preset": "fig1"},
            "agents": {"mock": MOCK},
            "out": str(out),
        }
        config_path = workdir / f"config_{name}.json"
        config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
        run([sys.executable, "-m", "complerank.cli", "run", "--config", config_path])
        run_dirs.append(out)

    report_dir = workdir / "report"
    run([sys.executable, "-m", "complerank.cli", "report", *run_dirs, "--out", report_dir])
    print(f"\ncombined table: {report_dir / 'report.csv'}")
    print(f"lift table:     {report_dir / 'lift_report.csv'}")


if __name__ == "__main__":
    main()
