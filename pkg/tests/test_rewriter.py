import json
import threading
from collections import Counter
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from siko.corpus import MixPlan, Record, build_augmented_set
from siko.errors import BadParams, TransportFailed
from siko.rewriter import (
    ACCEPTED,
    ENGLISH_PROMPT,
    FALLBACK,
    KOREAN_PROMPT,
    REJECTED,
    TRANSPORT_FAILED,
    HttpChatClient,
    ReplayClient,
    Rewriter,
    RewriterConfig,
    rewrite_many,
    rewrite_order,
    validate_retention,
)
from siko.sentence import Sentence
from siko.transforms import TransformSpec, shuf_sem_presrv

REPLAY = Path(__file__).parent / "fixtures" / "rewriter_replay.jsonl"


def brute_multiset_equal(a, b):
    return sorted(Sentence.parse(a).eojeols) == sorted(Sentence.parse(b).eojeols)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("나비가 꿀을 마신다.", "꿀을 나비가 마신다.", True),
        ("나비가 꿀을 마신다.", "나비가 꿀을 마셨다.", False),
        ("나비가 꿀을 마신다.", "나비가 꿀을 꿀을 마신다.", False),
        ("나비가 나비가 꿀을", "나비가 꿀을 꿀을", False),
        ("나비가 꿀을", "꿀을 나비가?", True),
    ],
)
def test_validate_retention(a, b, expected):
    assert validate_retention(a, b) is expected
    assert brute_multiset_equal(a, b) is expected


def test_default_template():
    cfg = RewriterConfig()
    assert cfg.prompt_template == KOREAN_PROMPT
    assert cfg.prompt("나비가 꿀을 마신다.").count("나비가 꿀을 마신다.") == 1
    assert "{DATA}" not in cfg.prompt("x")
    RewriterConfig(prompt_template=ENGLISH_PROMPT)
    for bad in ("no placeholder", "{DATA} {DATA}"):
        with pytest.raises(BadParams):
            RewriterConfig(prompt_template=bad)


def _run(text, max_retries=2, seed=1):
    cfg = RewriterConfig(max_retries=max_retries)
    return rewrite_order(text, cfg, ReplayClient(REPLAY), seed)


def test_accepted():
    out = _run("나비가 꿀을 마신다.")
    assert out.status == ACCEPTED and out.attempts == 1
    assert out.output.render() == "꿀을 나비가 마신다."
    assert not out.unchanged and out.needs_human_review


def test_dropped_word_is_rejected_then_falls_back():
    out = _run("아이들이 학교에 간다.", seed=5)
    assert out.history == [REJECTED] * 3
    assert out.status == FALLBACK
    assert out.output == shuf_sem_presrv("아이들이 학교에 간다.", 5)


def test_identity_reply_is_accepted_unchanged():
    out = _run("엄마는 시장에 갔어.")
    assert out.status == ACCEPTED and out.unchanged


def test_retry_limit():
    out = _run("대통령이 국회를 방문했다.", max_retries=1)
    assert out.attempts == 2 and out.status == FALLBACK
    out = _run("학생들이 도서관에서 책을 읽는다.", max_retries=0)
    assert out.attempts == 1 and out.status == FALLBACK


def test_transport_failure_falls_back():
    out = _run("선생님이 학생을 칭찬했다.", seed=3)
    assert out.status == TRANSPORT_FAILED and out.attempts == 3
    assert out.output == shuf_sem_presrv("선생님이 학생을 칭찬했다.", 3)
    assert _run("문장이 없다.").status == TRANSPORT_FAILED


def test_rewriter_disabled_pipeline_equals_rule_shuffle():
    recs = [Record(f"r{i}", "tc", {"title": "나비가 꿀을 오늘 마신다."}, "A") for i in range(8)]
    plan = MixPlan(1.0, TransformSpec("shuf_sem_presrv"), 5)
    direct = build_augmented_set(recs, plan)
    assert build_augmented_set(recs, plan, reorder=None) == direct
    # a rewriter that never gets a usable reply reproduces the rule path too
    rw = Rewriter(RewriterConfig(max_retries=0), ReplayClient(REPLAY))
    assert build_augmented_set(recs, plan, reorder=rw) == direct
    assert rw.stats() == {TRANSPORT_FAILED: 8}


def test_rewriter_in_pipeline_with_cm_del():
    recs = [Record("r0", "tc", {"title": "나비가 꿀을 마신다."}, "A")]
    rw = Rewriter(RewriterConfig(), ReplayClient(REPLAY))
    out = build_augmented_set(recs, MixPlan(1.0, TransformSpec("shuf_sem_presrv_cm_del"), 5), reorder=rw)
    assert out[1].fields["title"] == "꿀 나비 마신다."


def test_rewrite_many_keeps_order():
    texts = [json.loads(l)["input"] for l in REPLAY.read_text(encoding="utf-8").splitlines()]
    cfg = RewriterConfig(max_concurrency=4)
    outs = rewrite_many(texts, list(range(len(texts))), cfg, ReplayClient(REPLAY))
    serial = [rewrite_order(t, cfg, ReplayClient(REPLAY), i) for i, t in enumerate(texts)]
    assert [(o.status, o.output) for o in outs] == [(o.status, o.output) for o in serial]


class _Handler(BaseHTTPRequestHandler):
    requests: list = []
    reply = "꿀을 나비가 마신다."
    status = 200

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests.append((dict(self.headers), body))
        payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": self.reply}}]}).encode()
        self.send_response(self.status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.requests = []
    _Handler.status = 200
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_port}/v1/chat/completions"
    srv.shutdown()


def test_http_wire_format(server, monkeypatch):
    monkeypatch.setenv("SIKO_TEST_TOKEN", "sekrit")
    cfg = RewriterConfig(endpoint=server, model="test-model", token_env="SIKO_TEST_TOKEN", timeout=5)
    out = rewrite_order("나비가 꿀을 마신다.", cfg, HttpChatClient(cfg), 1)
    assert out.status == ACCEPTED
    headers, body = _Handler.requests[0]
    assert headers["Authorization"] == "Bearer sekrit"
    assert body["model"] == "test-model"
    assert body["messages"] == [{"role": "user", "content": cfg.prompt("나비가 꿀을 마신다.")}]


def test_http_errors_are_transport_failures(server):
    _Handler.status = 500
    cfg = RewriterConfig(endpoint=server, timeout=5, max_retries=1, token_env="SIKO_UNSET_TOKEN_VAR")
    with pytest.raises(TransportFailed):
        HttpChatClient(cfg).complete("p", Sentence.parse("x"))
    out = rewrite_order("나비가 꿀을 마신다.", cfg, HttpChatClient(cfg), 1)
    assert out.status == TRANSPORT_FAILED and out.attempts == 2
    assert "Authorization" not in _Handler.requests[0][0]


def test_unreachable_endpoint():
    cfg = RewriterConfig(endpoint="http://127.0.0.1:9/none", timeout=0.5, max_retries=0)
    assert rewrite_order("나비가 꿀을 마신다.", cfg, HttpChatClient(cfg), 1).status == TRANSPORT_FAILED


def test_config_from_file(tmp_path):
    p = tmp_path / "rw.json"
    p.write_text(json.dumps({"model": "m", "max_retries": 4}), encoding="utf-8")
    assert RewriterConfig.from_file(p).max_retries == 4
    p.write_text(json.dumps({"modle": "m"}), encoding="utf-8")
    with pytest.raises(BadParams):
        RewriterConfig.from_file(p)
