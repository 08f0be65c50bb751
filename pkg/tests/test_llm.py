import json
import string

import httpx
import pytest

from dtcrs.config import DEFAULT_TEMPERATURES
from dtcrs.llm import (
    STEPS,
    HttpChatProvider,
    LlmGateway,
    LlmProviderConfig,
    LlmRequest,
    MockProvider,
    TransportError,
    load_template,
    prompt_digest,
)
from dtcrs.llm.parsing import parse_choice, parse_label, parse_list, parse_toc, strip_answer_label
from dtcrs.model import Document, TableOfContents
from dtcrs.tokenize import DEFAULT_TOKENIZER

TOC = TableOfContents(((1, "Intro"), (1, "Methods")), "1. Intro\n2. Methods")


# -- parsers ------------------------------------------------------------------------

def test_parse_toc_levels():
    assert parse_toc("1. Intro\n2. Methods") == [(1, "Intro"), (1, "Methods")]
    assert parse_toc("1 Intro\n1.1 Scope\n## Data") == [(1, "Intro"), (2, "Scope"), (2, "Data")]
    assert parse_toc("- Top\n  - Child") == [(1, "Top"), (2, "Child")]
    assert parse_toc("no structure here") == []


@pytest.mark.parametrize("reply, label", [
    ("1", 1), ("0", 0), ("no", 0), ("Yes.", 1), ("Label: 1", 1), ("The answer is NO", 0), ("maybe?", None),
])
def test_parse_label_table(reply, label):
    assert parse_label(reply) == label


def test_parse_list_numbered_bulleted_and_plain():
    assert parse_list("1. A?\n\n2. B?\n\n3. C?") == ["A?", "B?", "C?"]
    assert parse_list("- x\n* y") == ["x", "y"]
    assert parse_list("Here they are\n1. first\n2) second") == ["first", "second"]
    assert parse_list("plain one\n\nplain two") == ["plain one", "plain two"]
    assert parse_list("") == []


@pytest.mark.parametrize("reply, n, idx", [
    ("B", 4, 1), ("(c)", 4, 2), ("Answer: D", 4, 3), ("2", 4, 1), ("Option A.", 4, 0), ("E", 4, None),
    ("", 4, None),
])
def test_parse_choice(reply, n, idx):
    assert parse_choice(reply, n) == idx


def test_strip_answer_label():
    assert strip_answer_label("Answer: yes") == "yes"
    assert strip_answer_label('Final answer: "the cat"') == "the cat"


# -- templates --------------------------------------------------------------------------

@pytest.mark.parametrize("step", STEPS)
def test_templates_exist_and_use_named_placeholders(step):
    template = load_template(step)
    fields = {f for _, f, _, _ in string.Formatter().parse(template) if f}
    assert fields, step
    assert all(f.isidentifier() for f in fields)


# -- gateway --------------------------------------------------------------------------

def test_toc_parsed_and_truncation_flag():
    mock = MockProvider({"toc": "1. Intro\n2. Methods"})
    gw = LlmGateway(mock, context_limit_tokens=5)
    toc = gw.generate_toc(Document("d", "", "one two three four five six seven"))
    assert toc.entries == ((1, "Intro"), (1, "Methods"))
    assert toc.truncated and not toc.degraded
    assert "six" not in mock.requests("toc")[0].prompt


def test_toc_fallback_is_degraded():
    gw = LlmGateway(MockProvider({"toc": ""}))
    toc = gw.generate_toc(Document("d", "", "Some text."))
    assert toc.degraded and len(toc.entries) == 1
    assert gw.fallbacks["toc_parse_fallback"] == 1


@pytest.mark.parametrize("reply, label", [("1", 1), ("no", 0), ("%%%", 0)])
def test_classify(reply, label, caplog):
    gw = LlmGateway(MockProvider({"classify": reply}))
    assert gw.classify_question("Why?", TOC) == label
    assert (gw.fallbacks["classify_parse_fallback"] == 1) == (reply == "%%%")


def test_decompose_and_fallback():
    gw = LlmGateway(MockProvider({"decompose": "1. A?\n\n2. B?\n3. C?"}))
    assert gw.decompose_question("Q?", TOC, "q1").sub_questions == ("A?", "B?", "C?")
    empty = LlmGateway(MockProvider({"decompose": ""}))
    s = empty.decompose_question("Q?", TOC, "q1")
    assert s.sub_questions == ("Q?",) and s.fallback


def test_decompose_without_toc_omits_it_from_prompt():
    mock = MockProvider()
    gw = LlmGateway(mock)
    gw.decompose_question("Q?", TOC, include_toc=False)
    gw.decompose_question("Q?", TOC, include_toc=True)
    without, with_toc = mock.requests("decompose")
    assert "Methods" not in without.prompt and "Methods" in with_toc.prompt


def test_summaries_echo_and_truncate():
    gw = LlmGateway(MockProvider())
    text = " ".join(f"w{i}" for i in range(30))
    assert gw.summarize_cluster([text], 100).text == " ".join(f"w{i}" for i in range(10))
    assert DEFAULT_TOKENIZER.count(gw.summarize_cluster(["tiny input here ok"], 100).text) <= 100
    long_reply = " ".join(["tok"] * 120)
    cut = LlmGateway(MockProvider({"summarize": long_reply})).summarize_cluster(["x"], 100)
    assert cut.truncated and DEFAULT_TOKENIZER.count(cut.text) == 100


def test_answers():
    assert LlmGateway(MockProvider({"answer_choice": "B"})).answer("q", ["c"], ["w", "x", "y", "z"]) == 1
    assert LlmGateway(MockProvider({"answer_freeform": "Answer: yes"})).answer("q", ["c"]) == "yes"
    gw = LlmGateway(MockProvider({"answer_choice": "E"}))
    assert gw.answer("q", ["c"], ["w", "x", "y", "z"]) == 0
    assert gw.fallbacks["choice_parse_fallback"] == 1


def test_context_packing_keeps_rank_order():
    gw = LlmGateway(MockProvider(), context_limit_tokens=5)
    assert gw.pack_context(["a b c", "d e", "f", "g h"]) == ["a b c", "d e"]


def test_temperatures_follow_steps():
    mock = MockProvider({"classify": "1"})
    gw = LlmGateway(mock)
    doc = Document("d", "", "Alpha. Beta. Gamma.")
    toc = gw.generate_toc(doc)
    gw.classify_question("q", toc)
    gw.decompose_question("q", toc)
    gw.summarize_cluster(["text"], 10)
    gw.answer("q", ["c"])
    gw.answer("q", ["c"], ["a", "b"])
    for req in mock.requests():
        assert req.temperature == DEFAULT_TEMPERATURES[req.step]
    assert {r.step for r in mock.requests()} == set(STEPS)


def test_mock_transcripts_repeat_exactly():
    def run():
        mock = MockProvider({"classify": "1"})
        gw = LlmGateway(mock)
        toc = gw.generate_toc(Document("d", "", "One thing. Another thing. Last thing."))
        gw.decompose_question("q", toc)
        gw.summarize_cluster(["a b c", "d e"], 5)
        return mock.transcript()
    assert run() == run()


def test_digest_keyed_script_wins():
    mock = MockProvider()
    gw = LlmGateway(mock)
    gw.classify_question("q", TOC)
    digest = prompt_digest(mock.requests("classify")[0].prompt)
    scripted = LlmGateway(MockProvider({("classify", digest): "1", "classify": "0"}))
    assert scripted.classify_question("q", TOC) == 1
    assert scripted.classify_question("other", TOC) == 0


def test_transport_errors_propagate():
    gw = LlmGateway(MockProvider({"summarize": TimeoutError("down")}))
    with pytest.raises(TransportError):
        gw.summarize_cluster(["x"], 10)


def test_request_validation():
    with pytest.raises(ValueError):
        LlmRequest("poem", "p", 0.0, 10)
    with pytest.raises(ValueError):
        LlmRequest("toc", "p", 0.0, 0)


# -- HTTP provider ---------------------------------------------------------------------

def _provider(handler, retries=2):
    cfg = LlmProviderConfig(base_url="http://llm/v1", model_name="m", api_key="k", max_retries=retries)
    return HttpChatProvider(cfg, httpx.Client(transport=httpx.MockTransport(handler)), backoff=0.0)


def test_http_provider_request_shape():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}]})

    reply = _provider(handler).complete(LlmRequest("answer_freeform", "prompt", 0.0, 16))
    assert reply == "hi"
    assert seen["url"] == "http://llm/v1/chat/completions" and seen["auth"] == "Bearer k"
    assert seen["body"]["messages"] == [{"role": "user", "content": "prompt"}]
    assert seen["body"]["temperature"] == 0.0 and seen["body"]["max_tokens"] == 16


def test_http_provider_retries_transient_errors():
    status = iter([503, 429, 200])

    def handler(request):
        code = next(status)
        return httpx.Response(code, json={"choices": [{"message": {"content": "ok"}}]})

    assert _provider(handler).complete(LlmRequest("toc", "p", 0.0, 4)) == "ok"


def test_http_provider_gives_up():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400)

    with pytest.raises(TransportError):
        _provider(handler).complete(LlmRequest("toc", "p", 0.0, 4))
    assert len(calls) == 1


def test_provider_config_from_env(monkeypatch):
    monkeypatch.setenv("DTCRS_MODEL", "my-model")
    monkeypatch.setenv("DTCRS_BASE_URL", "http://x")
    cfg = LlmProviderConfig.from_env()
    assert (cfg.model_name, cfg.base_url) == ("my-model", "http://x")
