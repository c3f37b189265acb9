"""SIKO constructions and baseline augmenters.

Every transform is a pure function of its inputs plus an explicit 64-bit seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import BadParams, EmptyInput
from .morphology import Lexicon, ParticleEntry, default_lexicon, detect_marker
from .rng import Rng
from .sentence import Sentence, as_sentence, split_trailing

SIKO_KINDS = (
    "cm_del",
    "shuf_sem_presrv",
    "shuf_sem_presrv_cm_del",
    "shuf_sem_non_presrv",
    "shuf_sem_non_presrv_cm_del",
)
BASELINE_KINDS = ("duplicate", "repetition", "eda", "aeda")
KINDS = SIKO_KINDS + BASELINE_KINDS

AEDA_PUNCT = (".", ";", "?", ":", "!", ",")

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "eda": {"p_syn_replace": 0.1, "p_syn_insert": 0.1, "p_swap": 0.1, "p_delete": 0.1},
    "aeda": {"insert_ratio": 0.3},
}

Synonyms = Mapping[str, "list[str] | tuple[str, ...]"]


def strip_markers(eojeol: str, lexicon: Lexicon | None = None) -> tuple[str, list[ParticleEntry]]:
    """Peel particles off the end of an eojeol until none is detected.

    Returns the bare stem and the stripped particles, outermost last, so
    ``학교에서는`` gives ``("학교", [에서, 는])``. Trailing punctuation is kept
    on the stem side.
    """
    core, trail = split_trailing(eojeol)
    if not core:
        return eojeol, []
    stripped: list[ParticleEntry] = []
    while True:
        seg = detect_marker(core, lexicon)
        if seg.marker is None:
            break
        stripped.append(seg.marker)
        core = seg.stem
    stripped.reverse()
    return core + trail, stripped


def cm_del(sentence: Sentence | str, lexicon: Lexicon | None = None) -> Sentence:
    sentence = as_sentence(sentence)
    lexicon = lexicon or default_lexicon()
    return sentence.with_eojeols(strip_markers(w, lexicon)[0] for w in sentence.eojeols)


def shuf_sem_presrv(sentence: Sentence | str, seed: int) -> Sentence:
    """Permute everything before the sentence-final predicate."""
    sentence = as_sentence(sentence)
    if len(sentence) < 2:
        return sentence
    head = list(sentence.eojeols[:-1])
    Rng(seed).shuffle(head)
    return sentence.with_eojeols(head + [sentence.eojeols[-1]])


def shuf_sem_non_presrv(sentence: Sentence | str, seed: int) -> Sentence:
    sentence = as_sentence(sentence)
    words = list(sentence.eojeols)
    Rng(seed).shuffle(words)
    return sentence.with_eojeols(words)


def mixed(sentence: Sentence | str, kind: str, seed: int, lexicon: Lexicon | None = None) -> Sentence:
    if kind == "presrv":
        shuffled = shuf_sem_presrv(sentence, seed)
    elif kind == "non_presrv":
        shuffled = shuf_sem_non_presrv(sentence, seed)
    else:
        raise BadParams(f"mixed kind must be 'presrv' or 'non_presrv', got {kind!r}")
    return cm_del(shuffled, lexicon)


def baseline_repetition(sentence: Sentence | str, seed: int) -> Sentence:
    sentence = as_sentence(sentence)
    if not sentence.eojeols:
        raise EmptyInput("repetition needs at least one word")
    words = list(sentence.eojeols)
    i = Rng(seed).below(len(words))
    words.insert(i + 1, words[i])
    return sentence.with_eojeols(words)


def _check_prob(name: str, p: Any) -> float:
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0.0 <= p <= 1.0:
        raise BadParams(f"{name} must be a probability in [0, 1], got {p!r}")
    return float(p)


def _op_count(p: float, n: int) -> int:
    return max(1, math.floor(p * n)) if p > 0 else 0


def baseline_eda(
    sentence: Sentence | str,
    seed: int,
    params: Mapping[str, float] | None = None,
    synonyms: Synonyms | None = None,
) -> Sentence:
    """EDA in one pass: synonym replacement, synonym insertion, swap, deletion.

    Operation counts follow EDA (``max(1, floor(p * n))`` when ``p > 0``);
    deletion drops each word independently with ``p_delete`` and keeps one
    random word if all would go.
    """
    p = {**DEFAULT_PARAMS["eda"], **(params or {})}
    unknown = set(p) - set(DEFAULT_PARAMS["eda"])
    if unknown:
        raise BadParams(f"unknown eda params: {sorted(unknown)}")
    p_sr = _check_prob("p_syn_replace", p["p_syn_replace"])
    p_ri = _check_prob("p_syn_insert", p["p_syn_insert"])
    p_rs = _check_prob("p_swap", p["p_swap"])
    p_rd = _check_prob("p_delete", p["p_delete"])

    sentence = as_sentence(sentence)
    words = list(sentence.eojeols)
    n = len(words)
    if n == 0:
        return sentence
    rng = Rng(seed)

    if synonyms is None:
        if p_sr > 0 or p_ri > 0:
            warnings.warn("no synonym lexicon given; skipping EDA synonym operations", RuntimeWarning, stacklevel=2)
    else:
        candidates = [w for w in dict.fromkeys(words) if synonyms.get(w)]
        rng.shuffle(candidates)
        for w in candidates[: _op_count(p_sr, n)]:
            replacement = rng.choice(list(synonyms[w]))
            words = [replacement if x == w else x for x in words]
        for _ in range(_op_count(p_ri, n)):
            pool = [w for w in words if synonyms.get(w)]
            if not pool:
                break
            syn = rng.choice(list(synonyms[rng.choice(pool)]))
            words.insert(rng.below(len(words) + 1), syn)

    if len(words) >= 2:
        for _ in range(_op_count(p_rs, n)):
            i = rng.below(len(words))
            j = rng.below(len(words) - 1)
            if j >= i:
                j += 1
            words[i], words[j] = words[j], words[i]

    if p_rd > 0:
        kept = [w for w in words if rng.random() >= p_rd]
        if not kept:
            kept = [words[rng.below(len(words))]]
        words = kept

    return sentence.with_eojeols(words)


def baseline_aeda(sentence: Sentence | str, seed: int, params: Mapping[str, float] | None = None) -> Sentence:
    """Insert ``floor(insert_ratio * n)`` punctuation tokens before random words."""
    p = {**DEFAULT_PARAMS["aeda"], **(params or {})}
    unknown = set(p) - set(DEFAULT_PARAMS["aeda"])
    if unknown:
        raise BadParams(f"unknown aeda params: {sorted(unknown)}")
    ratio = p["insert_ratio"]
    if not isinstance(ratio, (int, float)) or isinstance(ratio, bool) or not ratio >= 0 or math.isinf(ratio):
        raise BadParams(f"insert_ratio must be a finite number >= 0, got {ratio!r}")

    sentence = as_sentence(sentence)
    n = len(sentence)
    q = math.floor(ratio * n)
    if n == 0 or q == 0:
        return sentence
    rng = Rng(seed)
    before: list[list[str]] = [[] for _ in range(n)]
    for _ in range(q):
        slot = rng.below(n)
        before[slot].append(rng.choice(AEDA_PUNCT))
    words: list[str] = []
    for marks, w in zip(before, sentence.eojeols):
        words.extend(marks)
        words.append(w)
    return sentence.with_eojeols(words)


def strip_aeda(sentence: Sentence | str) -> Sentence:
    sentence = as_sentence(sentence)
    return sentence.with_eojeols(w for w in sentence.eojeols if w not in AEDA_PUNCT)


def load_synonyms(path: str | Path) -> dict[str, list[str]]:
    """Read ``word<TAB>synonym<TAB>synonym...`` lines; ``#`` starts a comment."""
    table: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip() or line.startswith("#"):
                continue
            word, *syns = [part.strip() for part in line.rstrip("\n").split("\t")]
            syns = [s for s in syns if s and s != word]
            if syns:
                table.setdefault(word, []).extend(syns)
    return table


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadParams(f"unknown transform kind {self.kind!r}; expected one of {', '.join(KINDS)}")

    def resolved_params(self) -> dict[str, Any]:
        return {**DEFAULT_PARAMS.get(self.kind, {}), **self.params}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": dict(sorted(self.resolved_params().items())), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TransformSpec":
        return cls(d["kind"], dict(d.get("params") or {}), int(d.get("seed", 0)))


def apply_transform(
    spec: TransformSpec,
    sentence: Sentence | str,
    lexicon: Lexicon | None = None,
    synonyms: Synonyms | None = None,
) -> Sentence:
    kind, seed = spec.kind, spec.seed
    if kind == "cm_del":
        return cm_del(sentence, lexicon)
    if kind == "shuf_sem_presrv":
        return shuf_sem_presrv(sentence, seed)
    if kind == "shuf_sem_non_presrv":
        return shuf_sem_non_presrv(sentence, seed)
    if kind == "shuf_sem_presrv_cm_del":
        return mixed(sentence, "presrv", seed, lexicon)
    if kind == "shuf_sem_non_presrv_cm_del":
        return mixed(sentence, "non_presrv", seed, lexicon)
    if kind == "duplicate":
        return as_sentence(sentence)
    if kind == "repetition":
        return baseline_repetition(sentence, seed)
    if kind == "eda":
        return baseline_eda(sentence, seed, spec.params, synonyms)
    return baseline_aeda(sentence, seed, spec.params)
