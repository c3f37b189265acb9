"""Hangul syllable arithmetic and particle (josa) segmentation of eojeols."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import EmptyInput, NotHangul, UnknownRole

HANGUL_FIRST = 0xAC00
HANGUL_LAST = 0xD7A3
N_VOWELS = 21
N_TAILS = 28
RIEUL_TAIL = 8

LEADS = "ㄱㄲㄴㄷㄸㄹㅁㅂㅃㅅㅆㅇㅈㅉㅊㅋㅌㅍㅎ"
VOWELS = "ㅏㅐㅑㅒㅓㅔㅕㅖㅗㅘㅙㅚㅛㅜㅝㅞㅟㅠㅡㅢㅣ"
TAILS = " ㄱㄲㄳㄴㄵㄶㄷㄹㄺㄻㄼㄽㄾㄿㅀㅁㅂㅄㅅㅆㅇㅈㅊㅋㅌㅍㅎ"

ROLES = (
    "nominative",
    "accusative",
    "topic",
    "genitive",
    "locative",
    "instrumental",
    "comitative",
    "auxiliary",
)
CASE_ROLES = frozenset(ROLES) - {"topic", "auxiliary"}


@dataclass(frozen=True)
class Syllable:
    lead: int
    vowel: int
    tail: int | None = None

    def compose(self) -> str:
        return chr(HANGUL_FIRST + (self.lead * N_VOWELS + self.vowel) * N_TAILS + (self.tail or 0))

    def jamo(self) -> tuple[str, str, str | None]:
        return LEADS[self.lead], VOWELS[self.vowel], TAILS[self.tail] if self.tail else None


def is_hangul_syllable(ch: str) -> bool:
    return len(ch) == 1 and HANGUL_FIRST <= ord(ch) <= HANGUL_LAST


def decompose_syllable(ch: str) -> Syllable:
    if not is_hangul_syllable(ch):
        raise NotHangul(f"not a precomposed Hangul syllable: {ch!r}")
    offset = ord(ch) - HANGUL_FIRST
    lead, rest = divmod(offset, N_VOWELS * N_TAILS)
    vowel, tail = divmod(rest, N_TAILS)
    return Syllable(lead, vowel, tail or None)


def has_batchim(word: str) -> bool:
    if not word:
        raise EmptyInput("has_batchim needs a nonempty word")
    last = word[-1]
    if not is_hangul_syllable(last):
        raise NotHangul(f"final character is not Hangul: {last!r}")
    return (ord(last) - HANGUL_FIRST) % N_TAILS != 0


class Batchim(str, enum.Enum):
    REQUIRED = "req"
    FORBIDDEN = "none"
    ANY = "any"
    # ㄹ-final stems pattern with vowel-final ones for 로/으로
    FORBIDDEN_OR_RIEUL = "none+rieul"
    REQUIRED_NOT_RIEUL = "req-rieul"

    def admits(self, stem: str) -> bool:
        """Whether a stem ending this way may carry the particle.

        A constrained particle never attaches to a stem whose last character
        is not a Hangul syllable, since its batchim is unknown.
        """
        if self is Batchim.ANY:
            return True
        last = stem[-1]
        if not is_hangul_syllable(last):
            return False
        tail = (ord(last) - HANGUL_FIRST) % N_TAILS
        if self is Batchim.REQUIRED:
            return tail != 0
        if self is Batchim.FORBIDDEN:
            return tail == 0
        if self is Batchim.FORBIDDEN_OR_RIEUL:
            return tail in (0, RIEUL_TAIL)
        return tail not in (0, RIEUL_TAIL)


@dataclass(frozen=True)
class ParticleEntry:
    surface: str
    role: str
    batchim: Batchim


@dataclass(frozen=True)
class Segmentation:
    stem: str
    marker: ParticleEntry | None
    original: str

    @property
    def role(self) -> str | None:
        return self.marker.role if self.marker else None


@dataclass(frozen=True)
class Lexicon:
    """Closed-class particle inventory, read-only after construction."""

    entries: tuple[ParticleEntry, ...]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.surface in seen:
                raise ValueError(f"duplicate particle surface: {e.surface}")
            if e.role not in ROLES:
                raise UnknownRole(e.role)
            seen.add(e.surface)
        # longest surface first; ties keep file order
        ordered = sorted(self.entries, key=lambda e: -len(e.surface))
        object.__setattr__(self, "_by_length", tuple(ordered))

    @property
    def by_length(self) -> tuple[ParticleEntry, ...]:
        return self._by_length  # type: ignore[attr-defined]

    @property
    def roles(self) -> frozenset[str]:
        return frozenset(e.role for e in self.entries)

    def surfaces(self) -> frozenset[str]:
        return frozenset(e.surface for e in self.entries)

    def get(self, surface: str) -> ParticleEntry | None:
        for e in self.entries:
            if e.surface == surface:
                return e
        return None

    def for_role(self, role: str) -> tuple[ParticleEntry, ...]:
        return tuple(e for e in self.entries if e.role == role)

    def without_roles(self, roles: Iterable[str]) -> "Lexicon":
        drop = set(roles)
        return Lexicon(tuple(e for e in self.entries if e.role not in drop))

    def groups(self, role: str) -> list[tuple[ParticleEntry, ...]]:
        """Allomorph groups for a role, in lexicon order.

        Unconstrained particles stand alone; constrained ones pair up in order
        (first batchim-final with first vowel-final) since they alternate by
        phonology rather than meaning.
        """
        entries = self.for_role(role)
        groups: list[list[ParticleEntry]] = []
        open_vowel: list[list[ParticleEntry]] = []
        open_batchim: list[list[ParticleEntry]] = []
        for e in entries:
            if e.batchim is Batchim.ANY:
                groups.append([e])
                continue
            wants_batchim = e.batchim in (Batchim.REQUIRED, Batchim.REQUIRED_NOT_RIEUL)
            partners = open_vowel if wants_batchim else open_batchim
            if partners:
                partners.pop(0).append(e)
            else:
                g = [e]
                groups.append(g)
                (open_batchim if wants_batchim else open_vowel).append(g)
        return [tuple(g) for g in groups]


def parse_lexicon(lines: Iterable[str], source: str = "<lexicon>") -> Lexicon:
    entries = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{source}:{lineno}: expected surface<TAB>role<TAB>constraint")
        surface, role, constraint = (p.strip() for p in parts)
        try:
            batchim = Batchim(constraint)
        except ValueError:
            raise ValueError(f"{source}:{lineno}: unknown batchim constraint {constraint!r}") from None
        if role not in ROLES:
            raise UnknownRole(f"{source}:{lineno}: {role}")
        entries.append(ParticleEntry(surface, role, batchim))
    return Lexicon(tuple(entries))


def load_lexicon(path: str | Path) -> Lexicon:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        return parse_lexicon(f, str(path))


@lru_cache(maxsize=None)
def default_lexicon(case_only: bool = False) -> Lexicon:
    """Bundled lexicon; ``case_only`` drops topic and auxiliary particles."""
    text = resources.files("siko").joinpath("data/default_lexicon.tsv").read_text(encoding="utf-8")
    lex = parse_lexicon(text.splitlines(), "default_lexicon.tsv")
    return lex.without_roles({"topic", "auxiliary"}) if case_only else lex


def detect_marker(eojeol: str, lexicon: Lexicon | None = None) -> Segmentation:
    lexicon = lexicon or default_lexicon()
    for entry in lexicon.by_length:
        n = len(entry.surface)
        if len(eojeol) > n and eojeol.endswith(entry.surface):
            stem = eojeol[:-n]
            if entry.batchim.admits(stem):
                return Segmentation(stem, entry, eojeol)
    return Segmentation(eojeol, None, eojeol)


def attach_marker(stem: str, role: str, lexicon: Lexicon | None = None, *, like: str | None = None) -> str:
    """Append the particle for ``role`` whose allomorph fits ``stem``.

    When a role has several particle families (에 and 에서 are both locative),
    ``like`` names a surface of the wanted family; otherwise the first family
    in lexicon order is used.
    """
    lexicon = lexicon or default_lexicon()
    if not stem:
        raise EmptyInput("stem must be nonempty")
    groups = lexicon.groups(role)
    if not groups:
        raise UnknownRole(role)
    group = groups[0]
    if like is not None:
        matching = [g for g in groups if any(e.surface == like for e in g)]
        if not matching:
            raise UnknownRole(f"{like!r} is not a {role} particle")
        group = matching[0]
    if all(e.batchim is Batchim.ANY for e in group):
        return stem + group[0].surface
    if not is_hangul_syllable(stem[-1]):
        raise NotHangul(f"cannot choose an allomorph after {stem[-1]!r}")
    for e in group:
        if e.batchim.admits(stem):
            return stem + e.surface
    raise UnknownRole(f"no {role} allomorph fits {stem!r}")
