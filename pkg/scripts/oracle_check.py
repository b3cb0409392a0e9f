#!/usr/bin/env python3
"""Independent sanity check of an oracle-mock run, by direct counting.

Reads only the files a run writes (retrieval.jsonl, per_query.jsonl,
metrics.json) and uses nothing from the package, so it cannot inherit a bug
from the pipeline or metrics code.  For a run whose agents were oracle mocks
it verifies:

  1. the per-query final-stage hit@1 is 1 exactly when the ground truth
     intersects the retrieved candidates, and the aggregated hit@1 equals the
     intersecting fraction as an exact rational;
  2. final-stage NDCG@K is exactly 1.0 for every query whose candidate list
     contains at least min(|ground truth|, K) ground-truth items.

Exit status 0 means every check passed.

Usage: python scripts/oracle_check.py RUN_DIR
"""

import json
import sys
from fractions import Fraction
from pathlib import Path

FINAL_STAGE = "diversity_accuracy"


def load_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def main(argv):
    if len(argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    run_dir = Path(argv[1])

    retrieval = load_jsonl(run_dir / "retrieval.jsonl")
    per_query = load_jsonl(run_dir / "per_query.jsonl")
    with open(run_dir / "metrics.json", encoding="utf-8") as fh:
        aggregated = json.load(fh)
    cutoffs = aggregated["cutoffs"]

    truth = {r["query_id"]: set(r["ground_truth"]) for r in retrieval}
    retrieved = {r["query_id"]: [c[0] for c in r["candidates"]] for r in retrieval}
    final_rows = {
        (row["query_id"], row["k"]): row for row in per_query if row["stage"] == FINAL_STAGE
    }

    failures = 0
    n_queries = len(retrieval)
    n_intersecting = sum(
        1 for qid in truth if truth[qid].intersection(retrieved[qid])
    )

    # Check 1: per-query and aggregated hit@1 against direct counting.
    for qid in truth:
        expected = 1 if truth[qid].intersection(retrieved[qid]) else 0
        got = final_rows[(qid, 1)]["hit"]
        if got != expected:
            print(f"FAIL hit@1 for {qid}: recorded {got}, counted {expected}")
            failures += 1
    expected_fraction = Fraction(n_intersecting, n_queries)
    recorded_hit1 = [
        row["hit"]
        for row in aggregated["rows"]
        if row["stage"] == FINAL_STAGE and row["k"] == 1
    ]
    if len(recorded_hit1) != 1 or recorded_hit1[0] != float(expected_fraction):
        print(
            f"FAIL aggregated hit@1: recorded {recorded_hit1}, "
            f"counted {n_intersecting}/{n_queries} = {float(expected_fraction)!r}"
        )
        failures += 1

    # Check 2: NDCG@K must be exactly 1.0 when enough truth was retrievable.
    checked = 0
    for qid in truth:
        hits_available = len(truth[qid].intersection(retrieved[qid]))
        for k in cutoffs:
            if hits_available >= min(len(truth[qid]), k):
                checked += 1
                ndcg = final_rows[(qid, k)]["ndcg"]
                if ndcg != 1.0:
                    print(f"FAIL ndcg@{k} for {qid}: {ndcg!r} != 1.0")
                    failures += 1

    print(
        f"queries={n_queries} intersecting_top_candidates={n_intersecting} "
        f"hit@1={float(expected_fraction)!r} ndcg_perfect_checks={checked}"
    )
    if failures:
        print(f"{failures} check(s) FAILED")
        return 1
    print("all checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
