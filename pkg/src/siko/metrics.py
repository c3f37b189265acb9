"""Incompleteness measurements: word edit distance, correction and omission rates."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Literal, Sequence

from .errors import EmptyInput, StemMismatch
from .morphology import Lexicon, default_lexicon
from .sentence import Sentence, as_sentence
from .transforms import strip_markers

Op = Literal["keep", "substitute", "insert", "delete"]


@dataclass(frozen=True)
class EditOp:
    op: Op
    source: str | None
    target: str | None


@dataclass(frozen=True)
class EditScript:
    ops: tuple[EditOp, ...]
    cost: int

    def apply(self, source: Sequence[str]) -> list[str]:
        return apply_script(self, source)


def word_edit_distance(a: Sequence[str], b: Sequence[str]) -> EditScript:
    """Unit-cost Levenshtein alignment over whole words.

    Backtrace prefers keep/substitute, then delete, then insert.
    """
    a, b = list(a), list(b)
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag = d[i - 1][j - 1] + (a[i - 1] != b[j - 1])
            d[i][j] = min(diag, d[i - 1][j] + 1, d[i][j - 1] + 1)

    ops: list[EditOp] = []
    i, j = n, m
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            kind = "keep" if a[i - 1] == b[j - 1] else "substitute"
            ops.append(EditOp(kind, a[i - 1], b[j - 1]))
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ops.append(EditOp("delete", a[i - 1], None))
            i -= 1
        else:
            ops.append(EditOp("insert", None, b[j - 1]))
            j -= 1
    ops.reverse()
    return EditScript(tuple(ops), d[n][m])


def apply_script(script: EditScript, source: Sequence[str]) -> list[str]:
    out: list[str] = []
    pos = 0
    for op in script.ops:
        if op.op in ("keep", "substitute", "delete"):
            if pos >= len(source) or source[pos] != op.source:
                raise ValueError(f"script does not match source at position {pos}")
            pos += 1
        if op.op in ("keep", "substitute", "insert"):
            out.append(op.target)  # type: ignore[arg-type]
    if pos != len(source):
        raise ValueError("script does not consume the whole source")
    return out


def _words(s: Sentence | str | Sequence[str]) -> list[str]:
    if isinstance(s, (Sentence, str)):
        return list(as_sentence(s).eojeols)
    return list(s)


def correction_rate(original: Sentence | str, corrected: Sentence | str) -> Fraction:
    """Word edit distance to the corrected order over the original word count.

    Returned as an exact fraction; it exceeds 1 when the correction adds words.
    """
    a, b = _words(original), _words(corrected)
    if not a:
        raise EmptyInput("original sentence has no words")
    return Fraction(word_edit_distance(a, b).cost, len(a))


def marker_counts(sentence: Sentence | str, lexicon: Lexicon | None = None) -> tuple[list[str], int]:
    """Stem sequence and total number of detected particles."""
    stems, total = [], 0
    for w in as_sentence(sentence).eojeols:
        stem, markers = strip_markers(w, lexicon)
        stems.append(stem)
        total += len(markers)
    return stems, total


def omission_rate(incomplete: Sentence | str, restored: Sentence | str, lexicon: Lexicon | None = None) -> Fraction:
    lexicon = lexicon or default_lexicon()
    inc_stems, inc_markers = marker_counts(incomplete, lexicon)
    res_stems, res_markers = marker_counts(restored, lexicon)
    if inc_stems != res_stems:
        raise StemMismatch(inc_stems, res_stems)
    if res_markers == 0:
        return Fraction(0)
    return Fraction(res_markers - inc_markers, res_markers)


@dataclass
class ReportItem:
    incomplete: Sentence | str
    restored: Sentence | str | None = None
    corrected: Sentence | str | None = None
    id: str | None = None


# rows of the incompleteness table that need a human judge
HUMAN_ONLY_ROWS = ("translation_issues_present",)


@dataclass
class IncompletenessReport:
    sample_count: int = 0
    marker_position_avg: float = 0.0
    detected_marker_avg: float = 0.0
    omission_rate_avg: float | None = None
    correction_rate_avg: float | None = None
    category_counts: dict[str, int | None] = field(default_factory=dict)
    stem_mismatch_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Tally:
    """Integer/rational accumulator; merging is commutative and associative."""

    n: int = 0
    marker_positions: int = 0
    detected_markers: int = 0
    with_restored: int = 0
    omission_sum: Fraction = Fraction(0)
    omission_n: int = 0
    with_corrected: int = 0
    correction_sum: Fraction = Fraction(0)
    correction_n: int = 0
    marker_omitted: int = 0
    non_canonical: int = 0
    mismatches: list[str] = field(default_factory=list)

    def merge(self, other: "_Tally") -> "_Tally":
        out = _Tally()
        for name in self.__dataclass_fields__:
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out


def _tally_one(item: ReportItem, index: int, lexicon: Lexicon) -> _Tally:
    t = _Tally(n=1)
    inc = as_sentence(item.incomplete)
    inc_stems, inc_markers = marker_counts(inc, lexicon)
    t.detected_markers = inc_markers
    if item.restored is None:
        t.marker_positions = inc_markers
    else:
        t.with_restored = 1
        res_stems, res_markers = marker_counts(item.restored, lexicon)
        t.marker_positions = res_markers
        if res_stems != inc_stems:
            t.mismatches = [item.id if item.id is not None else str(index)]
        else:
            rate = Fraction(res_markers - inc_markers, res_markers) if res_markers else Fraction(0)
            t.omission_sum, t.omission_n = rate, 1
            t.marker_omitted = int(rate > 0)
    if item.corrected is not None and len(inc):
        t.with_corrected = 1
        rate = correction_rate(inc, item.corrected)
        t.correction_sum, t.correction_n = rate, 1
        t.non_canonical = int(rate > 0)
    return t


def _as_item(x) -> ReportItem:
    if isinstance(x, ReportItem):
        return x
    if isinstance(x, (str, Sentence)):
        return ReportItem(x)
    return ReportItem(*x)


def corpus_report(items: Iterable, lexicon: Lexicon | None = None) -> IncompletenessReport:
    """Aggregate rates over records.

    ``items`` holds :class:`ReportItem` or ``(incomplete, restored, corrected)``
    tuples with optional trailing entries. Records whose stems do not align with
    their restoration are listed in ``stem_mismatch_ids`` and left out of the
    omission average.
    """
    lexicon = lexicon or default_lexicon()
    total = _Tally()
    for i, x in enumerate(items):
        total = total.merge(_tally_one(_as_item(x), i, lexicon))
    return _finish(total)


def _finish(t: _Tally) -> IncompletenessReport:
    def mean(s: Fraction | int, k: int) -> float:
        return float(Fraction(s) / k) if k else 0.0

    return IncompletenessReport(
        sample_count=t.n,
        marker_position_avg=mean(t.marker_positions, t.n),
        detected_marker_avg=mean(t.detected_markers, t.n),
        omission_rate_avg=mean(t.omission_sum, t.omission_n) if t.with_restored else None,
        correction_rate_avg=mean(t.correction_sum, t.correction_n) if t.with_corrected else None,
        category_counts={
            "with_restored": t.with_restored,
            "with_corrected": t.with_corrected,
            "case_marker_omitted": t.marker_omitted if t.with_restored else None,
            "non_canonical_word_order": t.non_canonical if t.with_corrected else None,
            "stem_mismatch": len(t.mismatches),
            "translation_issues_present": None,
        },
        stem_mismatch_ids=sorted(t.mismatches),
    )


TABLE_ROWS = (
    ("Sample Count", "sample_count"),
    ("Case Marker Omitted", "case_marker_omitted"),
    ("Non-Canonical Word Order", "non_canonical_word_order"),
    ("Translation Issues Present", "translation_issues_present"),
    ("Average Number of Case Marker Positions", "marker_position_avg"),
    ("Average Detected Case Markers", "detected_marker_avg"),
    ("Case Marker Omission Rate", "omission_rate_avg"),
    ("Word Order Correction Rate", "correction_rate_avg"),
    ("Stem Mismatches (excluded)", "stem_mismatch"),
)


def render_table(report: IncompletenessReport) -> str:
    d = report.to_dict()
    counts = d.pop("category_counts")
    width = max(len(label) for label, _ in TABLE_ROWS)
    lines = []
    for label, key in TABLE_ROWS:
        value = d[key] if key in d else counts.get(key)
        if value is None:
            cell = "n/a (human judgment)" if key in HUMAN_ONLY_ROWS else "n/a"
        elif key.endswith("rate_avg"):
            cell = f"{value * 100:.2f}%"
        elif isinstance(value, float):
            cell = f"{value:.2f}"
        else:
            cell = str(value)
        lines.append(f"{label:<{width}}  {cell}")
    return "\n".join(lines)
