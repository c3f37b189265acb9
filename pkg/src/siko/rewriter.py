"""Optional LLM reordering with mechanical word-retention checks.

Wire format (any chat-completion compatible endpoint works)::

    POST <endpoint>
    Authorization: Bearer $<token_env>        (omitted when the variable is unset)
    {"model": "<model>", "temperature": 0,
     "messages": [{"role": "user", "content": "<filled prompt>"}]}

    200 -> {"choices": [{"message": {"content": "<reordered sentence>"}}]}

The reply is accepted only if it keeps exactly the input's words (as a
multiset). Meaning preservation is not checked; every outcome is flagged for
human review.
"""

from __future__ import annotations

import json
import os
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .errors import BadParams, TransportFailed
from .sentence import Sentence, as_sentence
from .transforms import shuf_sem_presrv

PLACEHOLDER = "{DATA}"

# prompt used for the original reorderings (Korean) and its English gloss
KOREAN_PROMPT = (
    "다음 문장의 의미가 변하지 않게 어순을 변경해줘\n"
    "문장의 각 단어는 그대로 유지되어야 해\n"
    "\n"
    "입력: {DATA}\n"
    "\n"
    "변경된 문장은?"
)
ENGLISH_PROMPT = (
    "Please change the word order of the following Input sentence without altering its meaning.\n"
    "Each word in the sentence be maintained as is.\n"
    "\n"
    "Provide a short answer. \n"
    "\n"
    "Input sentence: {DATA}\n"
    "\n"
    "What is the altered sentence?"
)

ACCEPTED = "accepted"
REJECTED = "rejected_word_mismatch"
FALLBACK = "fallback_used"
TRANSPORT_FAILED = "transport_failed"


@dataclass(frozen=True)
class RewriterConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    token_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    prompt_template: str = KOREAN_PROMPT
    max_concurrency: int = 4

    def __post_init__(self):
        if self.prompt_template.count(PLACEHOLDER) != 1:
            raise BadParams("prompt_template must contain exactly one {DATA} placeholder")
        if self.max_retries < 0 or self.timeout <= 0 or self.max_concurrency < 1:
            raise BadParams("max_retries >= 0, timeout > 0 and max_concurrency >= 1 required")

    def prompt(self, sentence: Sentence | str) -> str:
        return self.prompt_template.replace(PLACEHOLDER, as_sentence(sentence).render())

    @classmethod
    def from_file(cls, path: str | Path) -> "RewriterConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise BadParams(f"unknown rewriter config keys: {sorted(unknown)}")
        return cls(**data)


class ChatClient(Protocol):
    def complete(self, prompt: str, sentence: Sentence) -> str: ...


class HttpChatClient:
    def __init__(self, config: RewriterConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def complete(self, prompt: str, sentence: Sentence) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {"model": cfg.model, "temperature": 0, "messages": [{"role": "user", "content": prompt}]}
        try:
            resp = self.session.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportFailed(str(e)) from e


class ReplayClient:
    """Serves canned replies from a JSONL file of ``{"input", "reply"}`` lines.

    ``reply`` may be a list, consumed one element per attempt; a ``null``
    element simulates a transport failure.
    """

    def __init__(self, path: str | Path):
        self.replies: dict[str, list[str | None]] = {}
        self._calls: Counter[str] = Counter()
        self._lock = threading.Lock()
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                obj = json.loads(line)
                reply = obj["reply"]
                key = as_sentence(obj["input"]).render()
                self.replies[key] = reply if isinstance(reply, list) else [reply]

    def complete(self, prompt: str, sentence: Sentence) -> str:
        key = sentence.render()
        if key not in self.replies:
            raise TransportFailed(f"no canned reply for {key!r}")
        queue = self.replies[key]
        with self._lock:
            i = self._calls[key]
            self._calls[key] += 1
        reply = queue[min(i, len(queue) - 1)]
        if reply is None:
            raise TransportFailed("canned transport failure")
        return reply


@dataclass
class RewriteOutcome:
    status: str
    output: Sentence
    attempts: int
    history: list[str] = field(default_factory=list)
    unchanged: bool = False
    needs_human_review: bool = True


def validate_retention(input: Sentence | str, output: Sentence | str) -> bool:
    return Counter(as_sentence(input).eojeols) == Counter(as_sentence(output).eojeols)


def _clean_reply(reply: str) -> str:
    for line in reply.strip().splitlines():
        line = line.strip().strip("\"'“”‘’`")
        if line:
            return line
    return ""


def rewrite_order(sentence: Sentence | str, config: RewriterConfig, client: ChatClient, seed: int) -> RewriteOutcome:
    """Ask the model for a reordering; fall back to the rule-based shuffle.

    Makes at most ``max_retries + 1`` attempts. The final status is
    ``accepted``, ``transport_failed`` when no attempt got a reply, or
    ``fallback_used`` otherwise; per-attempt results are in ``history``.
    """
    sentence = as_sentence(sentence)
    prompt = config.prompt(sentence)
    history: list[str] = []
    for attempt in range(1, config.max_retries + 2):
        try:
            reply = client.complete(prompt, sentence)
        except TransportFailed:
            history.append(TRANSPORT_FAILED)
            continue
        out = Sentence.parse(_clean_reply(reply))
        if validate_retention(sentence, out):
            history.append(ACCEPTED)
            out = Sentence(out.eojeols, sentence.terminal_punct)
            return RewriteOutcome(ACCEPTED, out, attempt, history, unchanged=out.eojeols == sentence.eojeols)
        history.append(REJECTED)
    status = TRANSPORT_FAILED if all(h == TRANSPORT_FAILED for h in history) else FALLBACK
    fallback = shuf_sem_presrv(sentence, seed)
    return RewriteOutcome(status, fallback, len(history), history, unchanged=fallback == sentence)


def rewrite_many(
    sentences: Sequence[Sentence | str], seeds: Sequence[int], config: RewriterConfig, client: ChatClient
) -> list[RewriteOutcome]:
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        return list(pool.map(lambda args: rewrite_order(args[0], config, client, args[1]), zip(sentences, seeds)))


class Rewriter:
    """Callable reorder hook for :func:`siko.corpus.build_augmented_set`.

    Keeps every outcome so callers can report rejection statistics.
    """

    def __init__(self, config: RewriterConfig, client: ChatClient):
        self.config = config
        self.client = client
        self.outcomes: list[RewriteOutcome] = []

    def __call__(self, sentence: Sentence, seed: int) -> Sentence:
        outcome = rewrite_order(sentence, self.config, self.client, seed)
        self.outcomes.append(outcome)
        return outcome.output

    def stats(self) -> dict[str, int]:
        return dict(sorted(Counter(o.status for o in self.outcomes).items()))
