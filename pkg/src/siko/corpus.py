"""Dataset records, sampling, splitting and augmentation mixing."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import __version__
from .errors import AugmentError, BadParams, BadRatio, ParseError, SchemaError, SikoError, TooFew, Unlabeled
from .morphology import Lexicon, default_lexicon
from .rng import Rng, derive_seed
from .sentence import Sentence
from .transforms import Synonyms, TransformSpec, apply_transform, cm_del

TASKS = ("tc", "nli", "dialogue")
FORMATS = ("generic_jsonl", "klue_tc_json", "klue_nli_json", "aihub_dialogue_json")
NLI_FIELD_MODES = ("premise", "hypothesis", "both")
STANDARD_RATES = (0.1, 0.3, 0.5, 1.0)


@dataclass(frozen=True)
class Record:
    id: str
    task: str
    fields: dict[str, Any]
    label: str | None = None
    provenance: dict[str, Any] | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise SchemaError("task", f"unknown task {self.task!r}")
        required = {"tc": ("title",), "nli": ("premise", "hypothesis"), "dialogue": ("utterances",)}[self.task]
        for name in required:
            if name not in self.fields:
                raise SchemaError(name, f"record {self.id}")
        if set(self.fields) != set(required):
            extra = sorted(set(self.fields) - set(required))
            raise SchemaError(extra[0], f"unexpected field for {self.task} record {self.id}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "task": self.task,
            "fields": self.fields,
            "label": self.label,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Record":
        for key in ("id", "task", "fields"):
            if key not in d:
                raise SchemaError(key)
        label = d.get("label")
        return cls(str(d["id"]), d["task"], dict(d["fields"]), None if label is None else str(label), d.get("provenance"))


def round_half_away(x: Fraction | int) -> int:
    x = Fraction(x)
    return math.floor(x + Fraction(1, 2)) if x >= 0 else -math.floor(-x + Fraction(1, 2))


def _exact(x: float | Fraction) -> Fraction:
    # decimal reading of a float, so 0.1 * 20000 is exactly 2000
    return x if isinstance(x, Fraction) else Fraction(str(x))


# ---------------------------------------------------------------------------
# loading


def _read_json(path: Path) -> Any:
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(str(path), e.lineno, e.colno, e.msg) from None


def _need(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, Mapping) or key not in obj:
        raise SchemaError(key, where)
    return obj[key]


def _opt_label(v: Any) -> str | None:
    return None if v is None else str(v)


def _instances(data: Any, path: Path) -> list:
    if isinstance(data, list):
        return data
    if isinstance(data, Mapping) and isinstance(data.get("data"), list):
        return data["data"]
    raise SchemaError("data", f"{path}: expected a list of instances")


def load_records(path: str | Path, format: str = "generic_jsonl", *, dialogue_label: str = "topic") -> list[Record]:
    """Read one dataset file into records.

    Instances without an id get ``<file stem>-<position>`` (zero padded).
    ``dialogue_label`` picks ``topic`` or ``summary`` as the label of AI-hub
    dialogues.
    """
    path = Path(path)
    if format not in FORMATS:
        raise BadParams(f"unknown format {format!r}")
    if not path.is_file():
        raise FileNotFoundError(path)

    def default_id(i: int) -> str:
        return f"{path.stem}-{i:06d}"

    records: list[Record] = []
    if format == "generic_jsonl":
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(str(path), lineno, e.colno, e.msg) from None
                where = f"{path}:{lineno}"
                if not isinstance(obj, dict):
                    raise SchemaError("text", where)
                rid = str(obj.get("id", default_id(len(records))))
                if "task" in obj and "fields" in obj:
                    records.append(Record.from_dict({**obj, "id": rid}))
                    continue
                records.append(Record(rid, "tc", {"title": _need(obj, "text", where)}, _opt_label(obj.get("label"))))
        return records

    data = _read_json(path)
    for i, inst in enumerate(_instances(data, path)):
        where = f"{path}[{i}]"
        if format == "klue_tc_json":
            rid = str(inst.get("guid", default_id(i))) if isinstance(inst, Mapping) else default_id(i)
            records.append(Record(rid, "tc", {"title": _need(inst, "title", where)}, _opt_label(inst.get("label"))))
        elif format == "klue_nli_json":
            premise = _need(inst, "premise", where)
            hypothesis = _need(inst, "hypothesis", where)
            rid = str(inst.get("guid", default_id(i)))
            label = inst.get("gold_label", inst.get("label"))
            records.append(Record(rid, "nli", {"premise": premise, "hypothesis": hypothesis}, _opt_label(label)))
        else:
            records.append(_aihub_record(inst, where, default_id(i), dialogue_label))
    return records


def _aihub_record(inst: Any, where: str, fallback_id: str, dialogue_label: str) -> Record:
    header = _need(inst, "header", where)
    body = _need(inst, "body", where)
    info = header.get("dialogueInfo", {}) if isinstance(header, Mapping) else {}
    turns = _need(body, "dialogue", where)
    utterances = []
    for k, turn in enumerate(turns):
        utterances.append(
            {
                "speaker": str(_need(turn, "participantID", f"{where}.dialogue[{k}]")),
                "text": _need(turn, "utterance", f"{where}.dialogue[{k}]"),
            }
        )
    if dialogue_label == "summary":
        label = body.get("summary")
    elif dialogue_label == "topic":
        label = info.get("topic")
    else:
        raise BadParams(f"dialogue_label must be 'topic' or 'summary', got {dialogue_label!r}")
    rid = str(info.get("dialogueID", fallback_id))
    return Record(rid, "dialogue", {"utterances": utterances}, _opt_label(label))


def write_jsonl(records: Iterable[Record], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.to_json())
            f.write("\n")


def by_id(records: Iterable[Record]) -> list[Record]:
    out = sorted(records, key=lambda r: r.id)
    for a, b in zip(out, out[1:]):
        if a.id == b.id:
            raise SchemaError("id", f"duplicate record id {a.id!r}")
    return out


# ---------------------------------------------------------------------------
# sampling and splitting


def apportion(counts: Mapping[str, int], n: int) -> dict[str, int]:
    """Largest-remainder allocation of ``n`` over class sizes.

    Ties on the remainder go to the larger class, then the smaller label.
    """
    total = sum(counts.values())
    if n > total:
        raise TooFew(f"asked for {n} of {total}")
    if total == 0:
        return {}
    quotas = {k: Fraction(n * c, total) for k, c in counts.items()}
    alloc = {k: math.floor(q) for k, q in quotas.items()}
    left = n - sum(alloc.values())
    order = sorted(counts, key=lambda k: (-(quotas[k] - alloc[k]), -counts[k], k))
    for k in order[:left]:
        alloc[k] += 1
    return alloc


def stratified_sample(records: Sequence[Record], n: int, seed: int) -> list[Record]:
    """Sample ``n`` records keeping the label distribution; result is in id order."""
    if n > len(records):
        raise TooFew(f"asked for {n} records from {len(records)}")
    if any(r.label is None for r in records):
        raise Unlabeled("stratified sampling needs every record labeled")
    groups: dict[str, list[Record]] = defaultdict(list)
    for r in by_id(records):
        groups[r.label].append(r)  # type: ignore[index]
    alloc = apportion({k: len(v) for k, v in groups.items()}, n)
    rng = Rng(seed)
    picked: list[Record] = []
    for label in sorted(groups):
        members = list(groups[label])
        rng.shuffle(members)
        picked.extend(members[: alloc[label]])
    return by_id(picked)


def uniform_sample(records: Sequence[Record], n: int, seed: int) -> list[Record]:
    if n > len(records):
        raise TooFew(f"asked for {n} records from {len(records)}")
    pool = by_id(records)
    Rng(seed).shuffle(pool)
    return by_id(pool[:n])


def split_train_val(records: Sequence[Record], ratio: float, seed: int) -> tuple[list[Record], list[Record]]:
    if not 0 < ratio < 1:
        raise BadRatio(f"ratio must be in (0, 1), got {ratio}")
    pool = by_id(records)
    Rng(seed).shuffle(pool)
    k = round_half_away(_exact(ratio) * len(pool))
    return by_id(pool[:k]), by_id(pool[k:])


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class MixPlan:
    rate: float
    transform: TransformSpec
    global_seed: int
    trial_index: int = 0
    base_count: int | None = None

    def __post_init__(self):
        if not 0 <= self.rate <= 1:
            raise BadParams(f"rate must be in [0, 1], got {self.rate}")
        if self.trial_index < 0:
            raise BadParams("trial_index must be >= 0")

    @property
    def trial_seed(self) -> int:
        return derive_seed(self.global_seed, self.trial_index)

    def augmented_count(self, n: int) -> int:
        return round_half_away(_exact(self.rate) * n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rate": self.rate,
            "transform": {"kind": self.transform.kind, "params": self.transform.to_dict()["params"]},
            "global_seed": self.global_seed,
            "trial_index": self.trial_index,
            "trial_seed": self.trial_seed,
            "base_count": self.base_count,
        }


def make_trials(plan: MixPlan, k: int) -> list[MixPlan]:
    if k < 1:
        raise BadParams("need at least one trial")
    return [replace(plan, trial_index=plan.trial_index + i) for i in range(k)]


# Sentence-level rewriter hook: (sentence, seed) -> sentence. Used in place of
# the rule-based shuffle for the meaning-preserving kinds.
Reorder = Callable[[Sentence, int], Sentence]


@dataclass(frozen=True)
class _Job:
    lexicon: Lexicon
    synonyms: Synonyms | None
    nli_fields: str
    reorder: Reorder | None


def _transform_text(text: str, spec: TransformSpec, job: _Job) -> str:
    if job.reorder is not None and spec.kind in ("shuf_sem_presrv", "shuf_sem_presrv_cm_del"):
        out = job.reorder(Sentence.parse(text), spec.seed)
        if spec.kind == "shuf_sem_presrv_cm_del":
            out = cm_del(out, job.lexicon)
        return out.render()
    return apply_transform(spec, text, job.lexicon, job.synonyms).render()


def transform_record(parent: Record, provenance: Mapping[str, Any], job: _Job, child_id: str) -> Record:
    """Apply the transform recorded in ``provenance`` to ``parent``.

    Each text field (title; premise, hypothesis; utterance k) gets its own
    seed, ``derive_seed(record_seed, k)`` with k its position in field order.
    """
    kind = provenance["kind"]
    params = provenance.get("params") or {}
    seed = provenance["seed"]
    if kind == "duplicate":
        return Record(child_id, parent.task, json.loads(json.dumps(parent.fields)), parent.label, dict(provenance))

    def spec_for(k: int) -> TransformSpec:
        return TransformSpec(kind, dict(params), derive_seed(seed, k))

    fields: dict[str, Any]
    if parent.task == "tc":
        fields = {"title": _transform_text(parent.fields["title"], spec_for(0), job)}
    elif parent.task == "nli":
        chosen = provenance.get("nli_fields", "both")
        fields = dict(parent.fields)
        for k, name in enumerate(("premise", "hypothesis")):
            if chosen in (name, "both"):
                fields[name] = _transform_text(parent.fields[name], spec_for(k), job)
    else:
        fields = {
            "utterances": [
                {**u, "text": _transform_text(u["text"], spec_for(k), job)}
                for k, u in enumerate(parent.fields["utterances"])
            ]
        }
    return Record(child_id, parent.task, fields, parent.label, dict(provenance))


def child_id(parent_id: str, kind: str, trial_index: int) -> str:
    return f"{parent_id}#{kind}.t{trial_index}"


def _run_chunk(args):
    tasks, job = args
    out = []
    for parent, prov, cid in tasks:
        try:
            out.append(("ok", transform_record(parent, prov, job, cid).to_dict()))
        except (SikoError, ValueError) as e:
            out.append(("err", (parent.id, f"{type(e).__name__}: {e}")))
    return out


def build_augmented_set(
    records: Sequence[Record],
    plan: MixPlan,
    lexicon: Lexicon | None = None,
    *,
    synonyms: Synonyms | None = None,
    nli_fields: str = "both",
    reorder: Reorder | None = None,
    jobs: int = 1,
) -> list[Record]:
    """Originals in id order followed by one transformed child per sampled parent.

    Parents are drawn with :func:`stratified_sample` when every record is
    labeled, uniformly otherwise. A child's seed depends only on the plan and
    its parent's position in the id-sorted originals, so the output does not
    depend on ``jobs`` or input order.
    """
    if nli_fields not in NLI_FIELD_MODES:
        raise BadParams(f"nli_fields must be one of {NLI_FIELD_MODES}")
    if any(r.provenance for r in records):
        raise BadParams("input contains augmented records; mix from originals only")
    originals = by_id(records)
    n = len(originals)
    if plan.base_count is not None and plan.base_count != n:
        raise BadParams(f"plan expects {plan.base_count} records, got {n}")
    k = plan.augmented_count(n)
    if k == 0:
        return originals

    trial_seed = plan.trial_seed
    labeled = all(r.label is not None for r in originals)
    parents = (stratified_sample if labeled else uniform_sample)(originals, k, trial_seed)
    index = {r.id: i for i, r in enumerate(originals)}
    params = plan.transform.resolved_params()
    tasks = []
    for parent in parents:
        prov: dict[str, Any] = {
            "kind": plan.transform.kind,
            "params": params,
            "seed": derive_seed(trial_seed, index[parent.id] + 1),
            "parent_id": parent.id,
            "trial_index": plan.trial_index,
        }
        if parent.task == "nli":
            prov["nli_fields"] = nli_fields
        tasks.append((parent, prov, child_id(parent.id, plan.transform.kind, plan.trial_index)))

    job = _Job(lexicon or default_lexicon(), synonyms, nli_fields, reorder)
    if jobs > 1 and len(tasks) > 1:
        size = math.ceil(len(tasks) / (jobs * 4))
        chunks = [(tasks[i : i + size], job) for i in range(0, len(tasks), size)]
        # a rewriter hook does network I/O and may hold unpicklable clients
        executor = ThreadPoolExecutor if reorder is not None else ProcessPoolExecutor
        with executor(max_workers=jobs) as pool:
            results = [item for chunk in pool.map(_run_chunk, chunks) for item in chunk]
    else:
        results = _run_chunk((tasks, job))

    failures = [payload for status, payload in results if status == "err"]
    if failures:
        raise AugmentError(failures)
    children = [Record.from_dict(payload) for _, payload in results]
    return originals + by_id(children)


def replay_child(child: Record, parent: Record, lexicon: Lexicon | None = None, synonyms: Synonyms | None = None) -> Record:
    """Regenerate ``child`` from its parent and recorded provenance."""
    if not child.provenance or child.provenance.get("parent_id") != parent.id:
        raise BadParams(f"{child.id} is not a child of {parent.id}")
    job = _Job(lexicon or default_lexicon(), synonyms, child.provenance.get("nli_fields", "both"), None)
    return transform_record(parent, child.provenance, job, child.id)


# ---------------------------------------------------------------------------
# manifests


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(
    plans: Sequence[MixPlan],
    inputs: Sequence[str | Path],
    run_config: Mapping[str, Any] | None = None,
    outputs: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    seeds = {p.global_seed for p in plans}
    if len(seeds) > 1:
        raise BadParams("all trials in a manifest must share one global seed")
    manifest: dict[str, Any] = {
        "global_seed": plans[0].global_seed if plans else None,
        "trials": [p.to_dict() for p in plans],
        "input_sha256": {str(p): sha256_file(p) for p in inputs},
        "tool_version": __version__,
    }
    if run_config is not None:
        manifest["run_config"] = dict(run_config)
    if outputs is not None:
        manifest["outputs"] = dict(outputs)
    return manifest


def write_manifest(manifest: Mapping[str, Any], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def label_histogram(records: Iterable[Record]) -> dict[str, int]:
    return dict(sorted(Counter(r.label for r in records if r.label is not None).items()))
