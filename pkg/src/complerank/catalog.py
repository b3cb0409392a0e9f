"""Product-graph data model: items, undirected complementary edges, file IO, holdout splits.

A catalog is a :class:`ComplementGraph`: a set of items (each with a title, a
multi-level category path and an optional price) plus undirected edges between
item ids that mark complementary relationships.  Evaluation instances are
produced by :func:`split_holdout`, which removes a seeded-random fraction of
edges and groups the removed endpoints into per-query ground-truth sets.

File formats (see README for examples):
  * items file: UTF-8 JSON Lines, one object per line with keys ``id`` (str),
    ``title`` (str), ``categories`` (list of str), ``price`` (number, optional).
  * edges file: one JSON array ``[id_a, id_b]`` per line.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class CatalogError(ValueError):
    """Malformed catalog data: bad file line, broken invariant, unknown id."""


@dataclass(frozen=True)
class Item:
    """A product node.

    ``categories`` is an ordered coarse-to-fine path; ``price`` is in
    unit-agnostic currency units and may be absent.
    """

    id: str
    title: str
    categories: tuple[str, ...] = ()
    price: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CatalogError("item id must be nonempty")
        if not self.title:
            raise CatalogError(f"item {self.id!r}: title must be nonempty")
        if any(not level for level in self.categories):
            raise CatalogError(f"item {self.id!r}: categories must not contain empty strings")
        if self.price is not None and self.price < 0:
            raise CatalogError(f"item {self.id!r}: price must be nonnegative")


def edge_key(a: str, b: str) -> tuple[str, str]:
    """Normalize an undirected edge to a sorted id pair.

    Self-loops are rejected: an item cannot complement itself.
    """
    if a == b:
        raise CatalogError(f"self-loop edge on {a!r}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class ComplementGraph:
    """Items plus undirected complementary edges.

    ``edges`` holds normalized (sorted) id pairs.  Instances are immutable by
    convention and safe to share across concurrent readers.  Build through
    :meth:`from_parts` to get normalization and validation.
    """

    items: dict[str, Item]
    edges: frozenset[tuple[str, str]]

    @classmethod
    def from_parts(
        cls, items: Iterable[Item], edge_pairs: Iterable[tuple[str, str]]
    ) -> "ComplementGraph":
        by_id: dict[str, Item] = {}
        for item in items:
            if item.id in by_id:
                raise CatalogError(f"duplicate item id {item.id!r}")
            by_id[item.id] = item
        edges = frozenset(edge_key(a, b) for a, b in edge_pairs)
        graph = cls(items=by_id, edges=edges)
        validate_graph(graph)
        return graph

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, item_id: str) -> frozenset[str]:
        """Ids directly linked to ``item_id`` (empty set if isolated)."""
        if item_id not in self.items:
            raise CatalogError(f"unknown item id {item_id!r}")
        return frozenset(
            b if a == item_id else a for a, b in self.edges if item_id in (a, b)
        )


@dataclass(frozen=True)
class QueryInstance:
    """A link-prediction query: one item id plus its held-out true complements."""

    query_id: str
    ground_truth: frozenset[str]

    def __post_init__(self) -> None:
        if not self.ground_truth:
            raise CatalogError(f"query {self.query_id!r}: ground truth must be nonempty")
        if self.query_id in self.ground_truth:
            raise CatalogError(f"query {self.query_id!r} appears in its own ground truth")


def validate_graph(graph: ComplementGraph) -> None:
    """Check referential integrity, normalization and absence of self-loops."""
    for a, b in graph.edges:
        if a == b:
            raise CatalogError(f"self-loop edge on {a!r}")
        if a > b:
            raise CatalogError(f"edge ({a!r}, {b!r}) is not normalized")
        for endpoint in (a, b):
            if endpoint not in graph.items:
                raise CatalogError(f"edge references unknown item id {endpoint!r}")


def _parse_item_line(path: Path, lineno: int, line: str) -> Item:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise CatalogError(f"{path}:{lineno}: expected a JSON object")
    try:
        item_id = record["id"]
        title = record["title"]
    except KeyError as exc:
        raise CatalogError(f"{path}:{lineno}: missing key {exc.args[0]!r}") from exc
    categories = record.get("categories", [])
    price = record.get("price")
    if not isinstance(item_id, str) or not isinstance(title, str):
        raise CatalogError(f"{path}:{lineno}: id and title must be strings")
    if not isinstance(categories, list) or any(not isinstance(c, str) for c in categories):
        raise CatalogError(f"{path}:{lineno}: categories must be an array of strings")
    if price is not None and not isinstance(price, (int, float)):
        raise CatalogError(f"{path}:{lineno}: price must be a number")
    try:
        return Item(
            id=item_id,
            title=title,
            categories=tuple(categories),
            price=None if price is None else float(price),
        )
    except CatalogError as exc:
        raise CatalogError(f"{path}:{lineno}: {exc}") from exc


def load_catalog(items_path: str | Path, edges_path: str | Path) -> ComplementGraph:
    """Load and validate a catalog from an items file and an edges file.

    Duplicate edges (including reversed duplicates) collapse to one undirected
    edge.  Errors report the offending file line.
    """
    items_path = Path(items_path)
    edges_path = Path(edges_path)

    items: dict[str, Item] = {}
    with items_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            item = _parse_item_line(items_path, lineno, line)
            if item.id in items:
                raise CatalogError(f"{items_path}:{lineno}: duplicate item id {item.id!r}")
            items[item.id] = item

    edges: set[tuple[str, str]] = set()
    with edges_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                pair = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"{edges_path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(x, str) for x in pair)
            ):
                raise CatalogError(
                    f"{edges_path}:{lineno}: expected a JSON array of two item ids"
                )
            a, b = pair
            for endpoint in (a, b):
                if endpoint not in items:
                    raise CatalogError(
                        f"{edges_path}:{lineno}: edge references unknown item id {endpoint!r}"
                    )
            try:
                edges.add(edge_key(a, b))
            except CatalogError as exc:
                raise CatalogError(f"{edges_path}:{lineno}: {exc}") from exc

    return ComplementGraph(items=items, edges=frozenset(edges))


def write_catalog(graph: ComplementGraph, items_path: str | Path, edges_path: str | Path) -> None:
    """Write a catalog in the items/edges file formats (sorted, reloadable)."""
    items_path = Path(items_path)
    edges_path = Path(edges_path)
    with items_path.open("w", encoding="utf-8") as fh:
        for item_id in sorted(graph.items):
            item = graph.items[item_id]
            record: dict[str, object] = {
                "id": item.id,
                "title": item.title,
                "categories": list(item.categories),
            }
            if item.price is not None:
                record["price"] = item.price
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with edges_path.open("w", encoding="utf-8") as fh:
        for a, b in sorted(graph.edges):
            fh.write(json.dumps([a, b]) + "\n")


def split_holdout(
    graph: ComplementGraph, holdout_fraction: float, seed: int
) -> tuple[ComplementGraph, list[QueryInstance]]:
    """Remove a seeded-random fraction of edges and turn them into queries.

    The held-out count is ``floor(holdout_fraction * |E| + 0.5)`` (half-up, so
    a 0.5 fraction of a single edge holds out that edge).  Each held-out edge
    contributes its lexicographically larger endpoint to the ground truth of
    the smaller one; queries are grouped per query node.  Held-out edges are
    absent from the returned train graph so retrievers cannot leak them.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise CatalogError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    if graph.n_edges == 0:
        raise CatalogError("cannot split a graph with no edges")
    count = math.floor(holdout_fraction * graph.n_edges + 0.5)
    if count == 0:
        raise CatalogError(
            f"holdout_fraction {holdout_fraction} of {graph.n_edges} edges rounds to zero held-out edges"
        )
    rng = random.Random(seed)
    held = rng.sample(sorted(graph.edges), count)

    train = ComplementGraph(items=graph.items, edges=graph.edges - set(held))
    grouped: dict[str, set[str]] = {}
    for query_id, complement_id in held:
        grouped.setdefault(query_id, set()).add(complement_id)
    queries = [
        QueryInstance(query_id=q, ground_truth=frozenset(grouped[q])) for q in sorted(grouped)
    ]
    return train, queries
