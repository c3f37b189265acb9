"""Command-line frontend: augment, analyze, sample, split, report."""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .corpus import (
    FORMATS,
    NLI_FIELD_MODES,
    MixPlan,
    Record,
    build_augmented_set,
    build_manifest,
    by_id,
    load_records,
    make_trials,
    sha256_file,
    split_train_val,
    stratified_sample,
    uniform_sample,
    write_jsonl,
    write_manifest,
)
from .errors import AugmentError, SikoError
from .metrics import ReportItem, corpus_report, render_table
from .morphology import Lexicon, default_lexicon, load_lexicon
from .rewriter import TRANSPORT_FAILED, ReplayClient, Rewriter, RewriterConfig, HttpChatClient
from .transforms import BASELINE_KINDS, KINDS, SIKO_KINDS, TransformSpec, load_synonyms

log = logging.getLogger("siko")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3
TRANSFORM_GROUPS = {"all5": SIKO_KINDS, "baselines": BASELINE_KINDS, "all": KINDS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Everything that determines an ``augment`` run's output.

    ``jobs`` and the output directory are left out on purpose: they must not
    change results, so they do not belong in the replay record.
    """

    subcommand: str = "augment"
    inputs: list[str] = field(default_factory=list)
    format: str = "generic_jsonl"
    transforms: list[str] = field(default_factory=lambda: ["cm_del"])
    params: dict[str, Any] = field(default_factory=dict)
    rate: float = 1.0
    seed: int = 0
    trials: int = 1
    lexicon: str | None = None
    case_only: bool = False
    synonyms: str | None = None
    nli_fields: str = "both"
    dialogue_label: str = "topic"
    rewriter: bool = False
    rewriter_config: str | None = None
    rewriter_replay: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown run_config keys: {sorted(unknown)}")
        return cls(**d)


def _parse_param(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    seed = secrets.randbits(64)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _lexicon(path: str | None, case_only: bool) -> Lexicon:
    lex = load_lexicon(path) if path else default_lexicon()
    return lex.without_roles({"topic", "auxiliary"}) if case_only else lex


def _expand_transforms(names: Sequence[str]) -> list[str]:
    out: list[str] = []
    for name in names:
        for kind in TRANSFORM_GROUPS.get(name, (name,)):
            if kind not in KINDS:
                raise UsageError(f"unknown transform {kind!r}")
            if kind not in out:
                out.append(kind)
    return out


def _load_all(paths: Sequence[str], fmt: str, dialogue_label: str = "topic") -> list[Record]:
    records: list[Record] = []
    for p in paths:
        records.extend(load_records(p, fmt, dialogue_label=dialogue_label))
    return records


def _output_name(kind: str, trial: int, many_kinds: bool, many_trials: bool) -> str:
    parts = ["augmented"]
    if many_kinds:
        parts.append(kind)
    if many_trials:
        parts.append(f"t{trial}")
    return ".".join(parts) + ".jsonl"


# ---------------------------------------------------------------------------
# subcommands


def run_augment(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    kinds = _expand_transforms(cfg.transforms)
    if cfg.nli_fields not in NLI_FIELD_MODES:
        raise UsageError(f"--nli-fields must be one of {', '.join(NLI_FIELD_MODES)}")
    if cfg.trials < 1:
        raise UsageError("--trials must be >= 1")
    records = _load_all(cfg.inputs, cfg.format, cfg.dialogue_label)
    lexicon = _lexicon(cfg.lexicon, cfg.case_only)
    synonyms = load_synonyms(cfg.synonyms) if cfg.synonyms else None

    rewriter = None
    if cfg.rewriter:
        rcfg = RewriterConfig.from_file(cfg.rewriter_config) if cfg.rewriter_config else RewriterConfig()
        client = ReplayClient(cfg.rewriter_replay) if cfg.rewriter_replay else HttpChatClient(rcfg)
        rewriter = Rewriter(rcfg, client)
        jobs = max(jobs, rcfg.max_concurrency)

    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    outputs: dict[str, str] = {}
    plans: list[MixPlan] = []
    try:
        for kind in kinds:
            params = cfg.params if kind in ("eda", "aeda") else {}
            base = MixPlan(cfg.rate, TransformSpec(kind, dict(params)), cfg.seed, 0, len(records))
            for plan in make_trials(base, cfg.trials):
                result = build_augmented_set(
                    records, plan, lexicon, synonyms=synonyms, nli_fields=cfg.nli_fields, reorder=rewriter, jobs=jobs
                )
                name = _output_name(kind, plan.trial_index, len(kinds) > 1, cfg.trials > 1)
                path = out_dir / name
                written.append(path)
                write_jsonl(result, path)
                outputs[name] = sha256_file(path)
                plans.append(plan)
                print(f"{name}\t{len(result)} records", file=sys.stderr)
        manifest = build_manifest(plans, cfg.inputs, cfg.to_dict(), outputs)
        if rewriter is not None:
            manifest["rewriter_stats"] = rewriter.stats()
        written.append(out_dir / "manifest.json")
        write_manifest(manifest, out_dir / "manifest.json")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    if rewriter is not None and rewriter.stats().get(TRANSPORT_FAILED):
        print(f"rewriter: {rewriter.stats()[TRANSPORT_FAILED]} transport failure(s); fallback shuffle used", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        cfg = RunConfig.from_dict(manifest["run_config"])
        for path, digest in manifest.get("input_sha256", {}).items():
            if sha256_file(path) != digest:
                raise SikoError(f"input {path} changed since the manifest was written")
    else:
        if not args.inputs:
            raise UsageError("--in is required")
        cfg = RunConfig(
            inputs=list(args.inputs),
            format=args.format,
            transforms=args.transform or ["cm_del"],
            params=dict(args.param or []),
            rate=args.rate,
            seed=_seed(args.seed),
            trials=args.trials,
            lexicon=args.lexicon,
            case_only=args.case_only,
            synonyms=args.synonyms,
            nli_fields=args.nli_fields,
            dialogue_label=args.dialogue_label,
            rewriter=args.rewriter,
            rewriter_config=args.rewriter_config,
            rewriter_replay=args.rewriter_replay,
        )
    for p in cfg.inputs:
        if not Path(p).is_file():
            raise FileNotFoundError(p)
    return run_augment(cfg, Path(args.out), args.jobs)


def _units(record: Record) -> list[str]:
    if record.task == "tc":
        return [record.fields["title"]]
    if record.task == "nli":
        return [record.fields["premise"], record.fields["hypothesis"]]
    return [u["text"] for u in record.fields["utterances"]]


def _paired(path: str | None, fmt: str, dialogue_label: str) -> dict[str, list[str]]:
    if not path:
        return {}
    return {r.id: _units(r) for r in load_records(path, fmt, dialogue_label=dialogue_label)}


def cmd_analyze(args: argparse.Namespace) -> int:
    records = _load_all(args.inputs, args.format, args.dialogue_label)
    restored = _paired(args.restored, args.paired_format or args.format, args.dialogue_label)
    corrected = _paired(args.corrected, args.paired_format or args.format, args.dialogue_label)
    items = []
    for r in by_id(records):
        res, cor = restored.get(r.id), corrected.get(r.id)
        units = _units(r)
        for k, text in enumerate(units):
            uid = r.id if len(units) == 1 else f"{r.id}/{k}"
            items.append(
                ReportItem(
                    text,
                    res[k] if res is not None and k < len(res) else None,
                    cor[k] if cor is not None and k < len(cor) else None,
                    uid,
                )
            )
    report = corpus_report(items, _lexicon(args.lexicon, args.case_only))
    table = render_table(report)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        (out / "report.txt").write_text(table + "\n", encoding="utf-8")
        sidecar = out / "stem_mismatch.jsonl"
        if report.stem_mismatch_ids:
            by_uid = {it.id: it for it in items}
            with open(sidecar, "w", encoding="utf-8") as f:
                for uid in report.stem_mismatch_ids:
                    it = by_uid[uid]
                    f.write(json.dumps({"id": uid, "incomplete": str(it.incomplete), "restored": str(it.restored)}, ensure_ascii=False) + "\n")
        else:
            sidecar.unlink(missing_ok=True)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    records = _load_all(args.inputs, args.format, args.dialogue_label)
    seed = _seed(args.seed)
    if all(r.label is not None for r in records):
        picked = stratified_sample(records, args.n, seed)
    else:
        picked = uniform_sample(records, args.n, seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(picked, args.out)
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    records = _load_all(args.inputs, args.format, args.dialogue_label)
    train, val = split_train_val(records, args.ratio, _seed(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(train, out / "train.jsonl")
    write_jsonl(val, out / "val.jsonl")
    print(f"train\t{len(train)}\nval\t{len(val)}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    records = _load_all(args.inputs, args.format, args.dialogue_label)
    summary = {
        "records": len(records),
        "tasks": dict(sorted(Counter(r.task for r in records).items())),
        "labels": dict(sorted(Counter(r.label for r in records if r.label is not None).items())),
        "transforms": dict(sorted(Counter(r.provenance["kind"] for r in records if r.provenance).items())),
        "originals": sum(1 for r in records if not r.provenance),
    }
    if args.json:
        print(json.dumps(summary, ensure_ascii=False, indent=2))
    else:
        print(f"records\t{summary['records']}\noriginals\t{summary['originals']}")
        for section in ("tasks", "labels", "transforms"):
            for k, v in summary[section].items():
                print(f"{section[:-1]}:{k}\t{v}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *, inputs_required: bool = True) -> None:
    p.add_argument("--in", dest="inputs", action="append", required=inputs_required, metavar="PATH", help="input dataset file (repeatable)")
    p.add_argument("--format", choices=FORMATS, default="generic_jsonl", help="input format (default: generic_jsonl)")
    p.add_argument("--dialogue-label", choices=("topic", "summary"), default="topic", help="label used for AI-hub dialogues")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="siko", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="append transformed copies to a dataset")
    _common(p, inputs_required=False)
    p.add_argument("--transform", action="append", metavar="KIND",
                   help=f"transform kind (repeatable): {', '.join(KINDS)}, or a group: {', '.join(TRANSFORM_GROUPS)}")
    p.add_argument("--param", action="append", type=_parse_param, metavar="KEY=VALUE", help="eda/aeda parameter, e.g. p_swap=0.2")
    p.add_argument("--rate", type=float, default=1.0, help="augmentation rate in [0, 1] (default 1.0)")
    p.add_argument("--seed", type=int, help="global seed; a random one is drawn and recorded when omitted")
    p.add_argument("--trials", type=int, default=1, help="number of independent trials (default 1)")
    p.add_argument("--lexicon", metavar="PATH", help="particle lexicon TSV overriding the bundled one")
    p.add_argument("--case-only", action="store_true", help="ignore topic and auxiliary particles")
    p.add_argument("--synonyms", metavar="PATH", help="synonym TSV for eda")
    p.add_argument("--nli-fields", choices=NLI_FIELD_MODES, default="both", help="NLI fields to transform (default both)")
    p.add_argument("--rewriter", action=argparse.BooleanOptionalAction, default=False, help="use the LLM rewriter for meaning-preserving shuffles")
    p.add_argument("--rewriter-config", metavar="PATH", help="rewriter JSON config")
    p.add_argument("--rewriter-replay", metavar="PATH", help="serve rewriter replies from a JSONL fixture instead of HTTP")
    p.add_argument("--from-manifest", metavar="PATH", help="replay the run recorded in a manifest")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers; never changes output")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("analyze", help="measure case-marker omission and word-order correction")
    _common(p)
    p.add_argument("--restored", metavar="PATH", help="same records with case markers restored")
    p.add_argument("--corrected", metavar="PATH", help="same records with word order corrected")
    p.add_argument("--paired-format", choices=FORMATS, help="format of --restored/--corrected (default: --format)")
    p.add_argument("--lexicon", metavar="PATH", help="particle lexicon TSV overriding the bundled one")
    p.add_argument("--case-only", action="store_true", help="ignore topic and auxiliary particles")
    p.add_argument("--out", metavar="DIR", help="write report.json, report.txt and stem_mismatch.jsonl here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sample", help="stratified sample of n records")
    _common(p)
    p.add_argument("-n", type=int, required=True, help="sample size")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--out", required=True, metavar="PATH", help="output JSONL")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("split", help="train/validation split")
    _common(p)
    p.add_argument("--ratio", type=float, default=0.9, help="training fraction (default 0.9)")
    p.add_argument("--seed", type=int, help="shuffle seed")
    p.add_argument("--out", required=True, metavar="DIR", help="writes train.jsonl and val.jsonl here")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("report", help="summarize a record file")
    _common(p)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"siko: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AugmentError as e:
        print(f"siko: {e}", file=sys.stderr)
        for rid, msg in e.failures[:20]:
            print(f"  {rid}: {msg}", file=sys.stderr)
        return EXIT_DATA
    except (SikoError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"siko: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
