import json
import random
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from siko.corpus import (
    MixPlan,
    Record,
    apportion,
    build_augmented_set,
    build_manifest,
    by_id,
    label_histogram,
    load_records,
    make_trials,
    replay_child,
    round_half_away,
    split_train_val,
    stratified_sample,
    write_jsonl,
)
from siko.errors import AugmentError, BadParams, BadRatio, ParseError, SchemaError, TooFew, Unlabeled
from siko.transforms import TransformSpec, cm_del

FIXTURES = Path(__file__).parent / "fixtures"


def tc(i, label="A", text="나비가 꿀을 마신다."):
    return Record(f"r{i:05d}", "tc", {"title": text}, label)


def test_load_generic_jsonl(tmp_path):
    p = tmp_path / "two.jsonl"
    p.write_text('{"text": "나비가 꿀을 마신다", "label": "a"}\n\n{"text": "꿀을 마신다", "label": 3}\n', encoding="utf-8")
    recs = load_records(p)
    assert [r.id for r in recs] == ["two-000000", "two-000001"]
    assert all(r.task == "tc" for r in recs)
    assert recs[1].label == "3"


def test_load_gold_fixture_ids_in_order(data_dir):
    recs = load_records(data_dir / "gold_fixture.jsonl")
    assert [r.id for r in recs] == [f"g{i:02d}" for i in range(1, 21)]


def test_load_klue_tc_and_nli():
    tcs = load_records(FIXTURES / "klue_tc.json", "klue_tc_json")
    assert [r.label for r in tcs] == ["정치", "IT과학", "스포츠"]
    assert tcs[0].id == "ynat-v1_train_00000"
    nli = load_records(FIXTURES / "klue_nli.json", "klue_nli_json")
    assert nli[0].fields == {"premise": "나비가 꿀을 마신다.", "hypothesis": "나비가 무언가를 마신다."}
    assert nli[1].label == "contradiction"


def test_nli_missing_hypothesis():
    with pytest.raises(SchemaError) as exc:
        load_records(FIXTURES / "klue_nli_missing.json", "klue_nli_json")
    assert exc.value.field == "hypothesis"


def test_load_aihub_dialogue():
    recs = load_records(FIXTURES / "aihub_dialogue.json", "aihub_dialogue_json")
    assert [r.id for r in recs] == ["d-0001", "d-0002"]
    assert recs[0].label == "식음료"
    assert recs[0].fields["utterances"][1] == {"speaker": "P02", "text": "나 김치찌개가 좋아"}
    summaries = load_records(FIXTURES / "aihub_dialogue.json", "aihub_dialogue_json", dialogue_label="summary")
    assert summaries[1].label == "주말에 영화를 보기로 했다."


def test_parse_error_location():
    with pytest.raises(ParseError) as exc:
        load_records(FIXTURES / "broken.jsonl")
    assert exc.value.line == 2


def test_record_schema_enforced():
    with pytest.raises(SchemaError):
        Record("x", "nli", {"premise": "a"})
    with pytest.raises(SchemaError):
        Record("x", "tc", {"title": "a", "premise": "b"})


def test_jsonl_round_trip(tmp_path):
    recs = [tc(1), Record("n", "nli", {"premise": "가", "hypothesis": "나"}, None, {"kind": "cm_del"})]
    write_jsonl(recs, tmp_path / "o.jsonl")
    assert load_records(tmp_path / "o.jsonl") == recs


def test_round_half_away():
    assert [round_half_away(Fraction(x, 2)) for x in (1, 3, 5, -1, -3)] == [1, 2, 3, -1, -2]


@pytest.mark.parametrize(
    "counts, n, expected",
    [
        ({"A": 7}, 5, {"A": 5}),
        ({"A": 70, "B": 30}, 10, {"A": 7, "B": 3}),
        ({"A": 2, "B": 1}, 2, {"A": 1, "B": 1}),
        ({"A": 1, "B": 1}, 1, {"A": 1, "B": 0}),
    ],
)
def test_apportion(counts, n, expected):
    assert apportion(counts, n) == expected


def test_stratified_examples():
    single = [tc(i) for i in range(9)]
    assert len(stratified_sample(single, 5, 1)) == 5
    recs = [tc(i, "A") for i in range(70)] + [tc(100 + i, "B") for i in range(30)]
    assert label_histogram(stratified_sample(recs, 10, 1)) == {"A": 7, "B": 3}
    small = [tc(0, "A"), tc(1, "A"), tc(2, "B")]
    assert label_histogram(stratified_sample(small, 2, 3)) == {"A": 1, "B": 1}


def test_stratified_errors():
    with pytest.raises(TooFew):
        stratified_sample([tc(0)], 2, 0)
    with pytest.raises(Unlabeled):
        stratified_sample([tc(0, None), tc(1)], 1, 0)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.sampled_from("ABCDEFG"), st.integers(1, 40), min_size=1), st.data())
def test_stratified_matches_apportionment(counts, data):
    recs = [tc(i, label) for i, label in enumerate(l for l, c in counts.items() for _ in range(c))]
    n = data.draw(st.integers(0, len(recs)))
    seed = data.draw(st.integers(0, 2**64 - 1))
    picked = stratified_sample(recs, n, seed)
    assert len({r.id for r in picked}) == n
    alloc = {k: v for k, v in apportion(counts, n).items() if v}
    assert label_histogram(picked) == dict(sorted(alloc.items()))


def test_split_examples():
    recs = [tc(i) for i in range(20)]
    train, val = split_train_val(recs, 0.9, 5)
    assert (len(train), len(val)) == (18, 2)
    assert split_train_val(recs, 0.9, 5) == (train, val)
    assert {r.id for r in train} | {r.id for r in val} == {r.id for r in recs}
    assert not {r.id for r in train} & {r.id for r in val}
    assert [len(x) for x in split_train_val(recs[:2], 0.5, 1)] == [1, 1]
    for bad in (0, 1, 1.5):
        with pytest.raises(BadRatio):
            split_train_val(recs, bad, 1)


def test_order_invariance():
    recs = [tc(i, "AB"[i % 2]) for i in range(40)]
    shuffled = recs[:]
    random.Random(3).shuffle(shuffled)
    assert stratified_sample(recs, 11, 9) == stratified_sample(shuffled, 11, 9)
    assert split_train_val(recs, 0.7, 9) == split_train_val(shuffled, 0.7, 9)
    plan = MixPlan(0.5, TransformSpec("shuf_sem_non_presrv"), 4)
    assert build_augmented_set(recs, plan) == build_augmented_set(shuffled, plan)


def test_augment_rate_zero_and_size():
    recs = [tc(i, "AB"[i % 2]) for i in range(20)]
    assert build_augmented_set(recs, MixPlan(0, TransformSpec("cm_del"), 1)) == by_id(recs)
    out = build_augmented_set(recs, MixPlan(0.5, TransformSpec("cm_del"), 1))
    assert len(out) == 30
    assert out[:20] == by_id(recs)
    assert all(r.provenance for r in out[20:])


def test_augment_full_rate_is_bijective():
    recs = [tc(i, "AB"[i % 3 == 0]) for i in range(20)]
    out = build_augmented_set(recs, MixPlan(1.0, TransformSpec("cm_del"), 1))
    children = [r for r in out if r.provenance]
    assert Counter(c.provenance["parent_id"] for c in children) == Counter(r.id for r in recs)
    assert all(c.fields["title"] == "나비 꿀 마신다." for c in children)


def test_duplicate_is_verbatim():
    recs = [tc(0, "A", "  나비가   꿀을 마신다. ")]
    out = build_augmented_set(recs, MixPlan(1.0, TransformSpec("duplicate"), 1))
    assert out[1].fields == recs[0].fields
    assert out[1].provenance["kind"] == "duplicate"


def test_nli_and_dialogue_fields():
    nli = load_records(FIXTURES / "klue_nli.json", "klue_nli_json")
    out = build_augmented_set(nli, MixPlan(1.0, TransformSpec("cm_del"), 2), nli_fields="premise")
    child = out[2]
    assert child.fields["premise"] == cm_del(nli[0].fields["premise"]).render()
    assert child.fields["hypothesis"] == nli[0].fields["hypothesis"]
    both = build_augmented_set(nli, MixPlan(1.0, TransformSpec("cm_del"), 2))
    assert both[2].fields["hypothesis"] == "나비 무언가 마신다."

    dia = load_records(FIXTURES / "aihub_dialogue.json", "aihub_dialogue_json")
    out = build_augmented_set(dia, MixPlan(1.0, TransformSpec("shuf_sem_non_presrv"), 2))
    for parent, child in zip(out[:2], out[2:]):
        assert [u["speaker"] for u in child.fields["utterances"]] == [u["speaker"] for u in parent.fields["utterances"]]
        for pu, cu in zip(parent.fields["utterances"], child.fields["utterances"]):
            assert sorted(pu["text"].split()) == sorted(cu["text"].split())


def test_unlabeled_records_sample_uniformly():
    recs = [tc(i, None) for i in range(10)]
    out = build_augmented_set(recs, MixPlan(0.3, TransformSpec("shuf_sem_presrv"), 1))
    assert len(out) == 13


def test_transform_errors_are_collected():
    recs = [tc(0, "A", ""), tc(1, "A", "."), tc(2, "A")]
    with pytest.raises(AugmentError) as exc:
        build_augmented_set(recs, MixPlan(1.0, TransformSpec("repetition"), 1))
    assert sorted(rid for rid, _ in exc.value.failures) == ["r00000", "r00001"]


def test_plan_validation():
    with pytest.raises(BadParams):
        MixPlan(1.5, TransformSpec("cm_del"), 1)
    with pytest.raises(BadParams):
        build_augmented_set([tc(0)], MixPlan(1.0, TransformSpec("cm_del"), 1, base_count=5))
    aug = build_augmented_set([tc(0)], MixPlan(1.0, TransformSpec("cm_del"), 1))
    with pytest.raises(BadParams):
        build_augmented_set(aug, MixPlan(1.0, TransformSpec("cm_del"), 1))


@pytest.mark.filterwarnings("ignore:no synonym lexicon")
@pytest.mark.parametrize("kind", ["cm_del", "shuf_sem_presrv", "shuf_sem_non_presrv_cm_del", "repetition", "eda", "aeda"])
def test_provenance_replay(kind):
    recs = [tc(i, "AB"[i % 2], "오늘 아이들이 학교에서 책을 읽는다.") for i in range(12)]
    recs += load_records(FIXTURES / "klue_nli.json", "klue_nli_json")
    recs += load_records(FIXTURES / "aihub_dialogue.json", "aihub_dialogue_json")
    out = build_augmented_set(recs, MixPlan(1.0, TransformSpec(kind, {"p_swap": 0.5} if kind == "eda" else {}), 77))
    parents = {r.id: r for r in out if not r.provenance}
    for child in (r for r in out if r.provenance):
        assert replay_child(child, parents[child.provenance["parent_id"]]).to_json() == child.to_json()


def test_make_trials():
    base = MixPlan(0.5, TransformSpec("cm_del"), 9)
    trials = make_trials(base, 5)
    assert [t.trial_index for t in trials] == [0, 1, 2, 3, 4]
    assert len({t.trial_seed for t in trials}) == 5
    assert make_trials(base, 1) == [base]
    with pytest.raises(BadParams):
        make_trials(base, 0)


def test_trials_give_different_children():
    recs = [tc(i, "A", "가 나 다 라 마 바 사") for i in range(10)]
    a, b = (build_augmented_set(recs, p) for p in make_trials(MixPlan(1.0, TransformSpec("shuf_sem_non_presrv"), 1), 2))
    assert [r.fields for r in a[10:]] != [r.fields for r in b[10:]]


def test_manifest_is_deterministic(tmp_path):
    src = tmp_path / "in.jsonl"
    write_jsonl([tc(0)], src)
    plans = make_trials(MixPlan(0.5, TransformSpec("cm_del"), 9), 5)
    m1 = build_manifest(plans, [src], {"seed": 9})
    m2 = build_manifest(make_trials(MixPlan(0.5, TransformSpec("cm_del"), 9), 5), [src], {"seed": 9})
    assert json.dumps(m1, sort_keys=True) == json.dumps(m2, sort_keys=True)
    assert m1["global_seed"] == 9
    assert [t["trial_index"] for t in m1["trials"]] == [0, 1, 2, 3, 4]
    assert len(m1["input_sha256"][str(src)]) == 64
    assert m1["tool_version"]


def test_parallel_equals_serial():
    recs = [tc(i, "ABC"[i % 3], "우리 집 고양이는 생선을 좋아해") for i in range(200)]
    plan = MixPlan(0.5, TransformSpec("shuf_sem_presrv_cm_del"), 3)
    assert build_augmented_set(recs, plan, jobs=1) == build_augmented_set(recs, plan, jobs=4)
