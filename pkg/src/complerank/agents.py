"""Reranking agents: prompt rendering, LLM transport, permutation parsing.

Two agent kinds share one prompt skeleton (query info, numbered candidate
list, task definition, few-shot examples, ranking instructions, output
format) and differ in exactly one ranking-instruction sentence: the diversity
agent pushes varied genres to the head of the list, the accuracy agent pushes
the most precisely complementary items.

The model is asked to answer with a bracketed ID permutation such as
``[1, 4, 3, 0, 2]``.  Models stray from that, so :func:`parse_permutation`
never rejects: it extracts the first bracketed integer list it can find and
repairs it into a full permutation, flagging every repair for audit.
"""

from __future__ import annotations

import os
import random
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import requests

from .catalog import Item


class AgentKind(str, Enum):
    DIVERSITY = "diversity"
    ACCURACY = "accuracy"


class PromptError(ValueError):
    """Unrenderable prompt request (empty or oversized candidate list)."""


class TransportError(RuntimeError):
    """LLM endpoint unreachable or persistently failing after retries."""


MAX_CANDIDATES = 100

_TASK_DEFINITION = (
    "The task is identifying the complementary relation between the given product and candidates.\n"
    "Complementary is defined as: products are likely to be purchased or used at the same time, "
    "but it is not a direct substitute."
)

_FEW_SHOT_EXAMPLES = (
    "A complementary product can be:\n"
    "- An accessory of the given product (e.g., iPhone Case is complementary to iPhone)\n"
    "- Both accessories to the same product (e.g., Speaker Cables can be complementary to Speaker Stands)\n"
    "- Products used together for the same activity (e.g., Bowl can be complementary to Plate)"
)

_RANKING_COMMON = (
    "Then rerank the candidates based on above given information. The order of reranking result "
    "should represent how likely the candidate is a complementary product."
)

_INSTRUCTION = {
    AgentKind.DIVERSITY: (
        "Meanwhile, focus on the diversity aspect "
        "(more items with different 'genre' feature at the top of the list)."
    ),
    AgentKind.ACCURACY: (
        "Meanwhile, focus on the accuracy aspect "
        "(choose items that are most precisely and correctly complementary to the given product)."
    ),
}

_OUTPUT_FORMAT = (
    "Your answer should ONLY rank all mentioned candidates ID, do NOT repeat or include Name. "
    "And omit anything else such as your thinking and decision-making process.\n"
    "Example answer format for 5 candidates: [1, 4, 3, 0, 2]"
)


@dataclass
class PromptBundle:
    """A rendered prompt plus the mapping from local integer IDs to item ids."""

    text: str
    index_to_id: list[str]
    kind: AgentKind


def build_prompt(
    query: Item,
    candidates: Sequence[Item],
    kind: AgentKind,
    max_candidates: int = MAX_CANDIDATES,
) -> PromptBundle:
    """Render the reranking prompt for ``candidates`` in input order.

    Candidates are labeled ``ID:0 .. ID:n-1``; only titles are exposed to the
    agent.  Rendering is deterministic: identical inputs give byte-identical
    prompt text.
    """
    candidates = list(candidates)
    if not candidates:
        raise PromptError("candidate list is empty")
    if len(candidates) > max_candidates:
        raise PromptError(f"{len(candidates)} candidates exceed the maximum of {max_candidates}")
    index_to_id = [item.id for item in candidates]
    if len(set(index_to_id)) != len(index_to_id):
        raise PromptError("candidate list contains duplicate item ids")

    listing = "\n".join(f"ID:{k} title: {item.title}" for k, item in enumerate(candidates))
    text = (
        "Considering a product, its basic information is:\n"
        f"{{title: {query.title}}}\n"
        "\n"
        "Here's a list of the candidate products:\n"
        f"{listing}\n"
        "\n"
        f"{_TASK_DEFINITION}\n"
        "\n"
        f"{_FEW_SHOT_EXAMPLES}\n"
        "\n"
        f"{_RANKING_COMMON}\n"
        f"{_INSTRUCTION[kind]}\n"
        "\n"
        f"{_OUTPUT_FORMAT}\n"
    )
    return PromptBundle(text=text, index_to_id=index_to_id, kind=kind)


@dataclass(frozen=True)
class LlmConfig:
    """Connection settings for an OpenAI-compatible chat-completions endpoint."""

    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    backoff_seconds: float = 0.2

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")


def complete(prompt: PromptBundle, config: LlmConfig) -> str:
    """POST the prompt as a single user message and return the assistant text.

    Retries transport errors and non-2xx statuses up to ``max_retries`` times
    with exponential backoff; raises :class:`TransportError` carrying the last
    failure once retries are exhausted.  An empty or missing API key sends no
    Authorization header (fine for unauthenticated local endpoints).
    """
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt.text}],
        "temperature": config.temperature,
    }

    last_failure = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(config.backoff_seconds * 2 ** (attempt - 1))
        try:
            response = requests.post(url, json=body, headers=headers, timeout=config.timeout)
        except requests.RequestException as exc:
            last_failure = f"transport error: {exc}"
            continue
        if not 200 <= response.status_code < 300:
            last_failure = f"HTTP {response.status_code}: {response.text[:200]}"
            continue
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unparseable completion payload from {url}: {exc!r}")
    raise TransportError(
        f"request to {url} failed after {config.max_retries + 1} attempt(s); last: {last_failure}"
    )


# Repair flags attached to parsed permutations.
DEDUPLICATED = "deduplicated"
DROPPED_OUT_OF_RANGE = "dropped_out_of_range"
APPENDED_MISSING = "appended_missing"
FALLBACK_IDENTITY = "fallback_identity"

_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")
_INT_RE = re.compile(r"[+-]?\d+")


def parse_permutation(raw: str, n: int) -> "ParsedPermutation":
    """Extract and repair a ranking over local IDs ``0..n-1`` from model output.

    The first bracketed comma-separated list containing at least one integer
    is used.  Repairs, applied in order: drop non-integer tokens, drop
    out-of-range IDs, keep the first occurrence of duplicates, append missing
    IDs in ascending order.  With no usable bracketed list at all, the
    identity order is returned.  Every input yields a valid permutation; the
    ``repairs`` flags record how much of the model's answer survived.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    values: list[int] | None = None
    for match in _BRACKET_RE.finditer(raw):
        tokens = [token.strip() for token in match.group(1).split(",")]
        parsed = [int(token) for token in tokens if _INT_RE.fullmatch(token)]
        if parsed:
            values = parsed
            break

    repairs: set[str] = set()
    if values is None:
        return ParsedPermutation(order=list(range(n)), repairs=frozenset({FALLBACK_IDENTITY}), raw=raw)

    in_range = [v for v in values if 0 <= v < n]
    if len(in_range) != len(values):
        repairs.add(DROPPED_OUT_OF_RANGE)

    order: list[int] = []
    seen: set[int] = set()
    for v in in_range:
        if v in seen:
            repairs.add(DEDUPLICATED)
            continue
        seen.add(v)
        order.append(v)

    if len(order) < n:
        repairs.add(APPENDED_MISSING)
        order.extend(v for v in range(n) if v not in seen)

    return ParsedPermutation(order=order, repairs=frozenset(repairs), raw=raw)


@dataclass
class ParsedPermutation:
    """A repaired ranking: ``order`` is always a permutation of ``0..n-1``."""

    order: list[int]
    repairs: frozenset[str] = field(default_factory=frozenset)
    raw: str = ""


Transport = Callable[[PromptBundle], str]


def http_transport(config: LlmConfig) -> Transport:
    """Wrap :func:`complete` as a per-prompt callable."""

    def call(bundle: PromptBundle) -> str:
        return complete(bundle, config)

    return call


def _render(order: Iterable[int]) -> str:
    return "[" + ", ".join(str(v) for v in order) + "]"


def mock_agent(
    policy: str,
    seed: int | None = None,
    ground_truth: Iterable[str] | None = None,
) -> Transport:
    """Deterministic stand-ins for :func:`complete`, for tests and dry runs.

    ``identity`` echoes the input order, ``reverse`` flips it,
    ``seeded_shuffle`` returns a seed-deterministic permutation (independent
    of call order), and ``oracle`` moves ground-truth candidates to the front
    while preserving input order within both groups.
    """
    if policy == "identity":
        return lambda bundle: _render(range(len(bundle.index_to_id)))
    if policy == "reverse":
        return lambda bundle: _render(reversed(range(len(bundle.index_to_id))))
    if policy == "seeded_shuffle":
        if seed is None:
            raise ValueError("seeded_shuffle requires a seed")

        def shuffled(bundle: PromptBundle) -> str:
            n = len(bundle.index_to_id)
            order = list(range(n))
            random.Random(f"{seed}:{n}").shuffle(order)
            return _render(order)

        return shuffled
    if policy == "oracle":
        if ground_truth is None:
            raise ValueError("oracle requires a ground-truth id set")
        truth = frozenset(ground_truth)

        def oracled(bundle: PromptBundle) -> str:
            hits = [k for k, item_id in enumerate(bundle.index_to_id) if item_id in truth]
            misses = [k for k, item_id in enumerate(bundle.index_to_id) if item_id not in truth]
            return _render(hits + misses)

        return oracled
    raise ValueError(f"unknown mock policy {policy!r}")
