"""Sentence model: eojeols plus detached terminal punctuation."""

from __future__ import annotations

from dataclasses import dataclass

TERMINAL_PUNCT = ".?!…"
# trailing characters stripped from an eojeol before particle detection
TRAILING_PUNCT = TERMINAL_PUNCT + ",;:\"'”’)]}»」』"


@dataclass(frozen=True)
class Sentence:
    eojeols: tuple[str, ...]
    terminal_punct: str = ""

    @classmethod
    def parse(cls, text: str) -> "Sentence":
        tokens = text.split()
        punct = ""
        if tokens:
            last = tokens[-1]
            core = last.rstrip(TERMINAL_PUNCT)
            punct = last[len(core):]
            if core:
                tokens[-1] = core
            else:
                tokens.pop()
        return cls(tuple(tokens), punct)

    def render(self) -> str:
        return " ".join(self.eojeols) + self.terminal_punct

    def __str__(self) -> str:
        return self.render()

    def __len__(self) -> int:
        return len(self.eojeols)

    def with_eojeols(self, eojeols) -> "Sentence":
        return Sentence(tuple(eojeols), self.terminal_punct)


def as_sentence(value: "Sentence | str") -> Sentence:
    return value if isinstance(value, Sentence) else Sentence.parse(value)


def split_trailing(token: str) -> tuple[str, str]:
    core = token.rstrip(TRAILING_PUNCT)
    return core, token[len(core):]
