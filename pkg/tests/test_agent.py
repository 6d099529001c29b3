import pytest

from geoextract.agent import (
    AgentSession,
    Budgets,
    TOOL_SCHEMAS,
    context_window,
    handle_action,
    run_session,
    summarize_selections,
)
from geoextract.corpus import Document, TagSpan
from geoextract.gateway import (
    Gateway,
    ModelConfig,
    RecordingTransport,
    ScriptedTransport,
    ToolCall,
)

from fake_llm import EndlessSearcher, FakeAgentModel, ScriptPlayer


def gw(transport) -> Gateway:
    return Gateway(ModelConfig(model_id="fake"), transport=transport)


def test_happy_path_three_actions(fixture_index):
    session = run_session("Goma", "Heavy fighting near Goma.",
                          gw(FakeAgentModel()), fixture_index)
    assert session.finished
    assert not session.failed
    assert session.actions_used == 3  # search, select, finish
    assert len(session.selections) == 1
    assert session.selections[0].geonameid == 202061
    assert session.selections[0].literal is True
    assert session.finish_reason == "all places resolved"


def test_budget_forces_finish_at_fifteen(fixture_index):
    session = run_session("Goma", "ctx", gw(EndlessSearcher()), fixture_index)
    assert session.finished
    assert session.finish_reason == "budget exhausted"
    assert session.actions_used == 15
    assert session.tool_call_count == 15


def test_sixteen_calls_in_one_reply_stop_at_budget(fixture_index):
    calls = [ToolCall("search_tool", {"query": f"p{i}"}) for i in range(16)]

    class Burst:
        def send(self, messages, config, tools=None):
            from geoextract.gateway import ChatExchange
            return ChatExchange(request_messages=tuple(messages),
                                response_text="", tool_calls=tuple(calls))

    session = run_session("Goma", "ctx", gw(Burst()), fixture_index)
    assert session.actions_used == 15
    assert session.finish_reason == "budget exhausted"


def test_per_place_cap_third_search_errors(fixture_index):
    budgets = Budgets()
    session = AgentSession(tag_surface="Goma", context_window="ctx")
    search = ToolCall("search_tool", {"query": "Goma"})
    first = handle_action(session, search, fixture_index, budgets)
    second = handle_action(session, search, fixture_index, budgets)
    third = handle_action(session, search, fixture_index, budgets)
    assert "candidates" in first and "candidates" in second
    assert "search budget exceeded for place" in third
    assert session.actions_used == 3  # the rejected call still costs an action
    assert session.searches_by_place["Goma"] == 2


def test_cap_is_per_place(fixture_index):
    budgets = Budgets()
    session = AgentSession(tag_surface="t", context_window="c")
    for query in ("Goma", "Goma", "Kigali", "Kigali"):
        result = handle_action(
            session, ToolCall("search_tool", {"query": query}),
            fixture_index, budgets,
        )
        assert "candidates" in result


def test_duplicate_select_rejected(fixture_index):
    budgets = Budgets()
    session = AgentSession(tag_surface="Goma", context_window="c")
    select = ToolCall("select_tool", {
        "place": "Goma", "geonameid": 202061,
        "context": "city", "literal_toponym": True,
    })
    first = handle_action(session, select, fixture_index, budgets)
    second = handle_action(session, select, fixture_index, budgets)
    assert "ok" in first
    assert "duplicate selection" in second
    assert len(session.selections) == 1


def test_unknown_geonameid_rejected(fixture_index):
    session = AgentSession(tag_surface="t", context_window="c")
    result = handle_action(session, ToolCall("select_tool", {
        "place": "X", "geonameid": 999999999,
        "context": "", "literal_toponym": True,
    }), fixture_index, Budgets())
    assert "unknown geonameid" in result
    assert session.selections == []


def test_sentinel_selection_recorded(fixture_index):
    session = AgentSession(tag_surface="t", context_window="c")
    result = handle_action(session, ToolCall("select_tool", {
        "place": "Atlantis", "geonameid": -1,
        "context": "not in gazetteer", "literal_toponym": True,
    }), fixture_index, Budgets())
    assert "ok" in result
    assert session.selections[0].geonameid == -1


def test_search_candidates_headed_by_sea(fixture_index):
    session = AgentSession(tag_surface="t", context_window="c")
    result = handle_action(
        session, ToolCall("search_tool", {"query": "Mediterranean"}),
        fixture_index, Budgets(),
    )
    assert '"geonameid": 363196' in result


def test_finish_marks_finished(fixture_index):
    session = AgentSession(tag_surface="t", context_window="c")
    handle_action(session, ToolCall("finish_tool",
                                    {"reason": "all places resolved"}),
                  fixture_index, Budgets())
    assert session.finished
    assert session.finish_reason == "all places resolved"
    with pytest.raises(RuntimeError):
        handle_action(session, ToolCall("finish_tool", {"reason": "again"}),
                      fixture_index, Budgets())


def test_transport_failure_marks_failed(fixture_index):
    session = run_session("Goma", "ctx", gw(ScriptedTransport([])), fixture_index)
    assert session.failed
    assert session.finished
    assert session.tool_call_count == 0
    assert "transport error" in (session.finish_reason or "")


def test_replay_is_bitwise_reproducible(fixture_index):
    recorder = RecordingTransport(FakeAgentModel())
    live = run_session("Goma", "near Goma", gw(recorder), fixture_index)

    scripted = ScriptedTransport(recorder.exchanges)
    replayed_a = run_session("Goma", "near Goma", gw(scripted), fixture_index)
    replayed_b = run_session("Goma", "near Goma", gw(scripted), fixture_index)
    assert replayed_a == replayed_b
    assert replayed_a.selections == live.selections
    assert replayed_a.transcript == live.transcript


def test_summarize_selections(fixture_index):
    session = run_session("Goma", "ctx", gw(FakeAgentModel(literal=False)),
                          fixture_index)
    span = TagSpan(0, 4, "Goma")
    records = summarize_selections("d1", span, session)
    assert len(records) == 1
    assert records[0].literal is False
    assert records[0].doc_id == "d1"
    assert records[0].span == span


def test_summarize_failed_session_empty(fixture_index):
    session = run_session("Goma", "ctx", gw(ScriptedTransport([])), fixture_index)
    assert summarize_selections("d1", TagSpan(0, 4, "Goma"), session) == []


def test_script_player_against_index(fixture_index):
    calls = [
        ToolCall("search_tool", {"query": "Goma"}),
        ToolCall("select_tool", {"place": "Goma", "geonameid": 202061,
                                 "context": "city in DRC",
                                 "literal_toponym": True}),
        ToolCall("finish_tool", {"reason": "done"}),
    ]
    session = run_session("Goma", "ctx", gw(ScriptPlayer(calls)), fixture_index)
    assert session.actions_used == 3
    assert [s.geonameid for s in session.selections] == [202061]


def test_tool_schema_names_and_keys():
    names = [t["function"]["name"] for t in TOOL_SCHEMAS]
    assert names == ["search_tool", "select_tool", "finish_tool"]
    select = TOOL_SCHEMAS[1]["function"]["parameters"]["properties"]
    assert set(select) == {"place", "geonameid", "context", "literal_toponym"}
    search = TOOL_SCHEMAS[0]["function"]["parameters"]["properties"]
    assert set(search) == {"query", "country_code"}


def test_context_window_sentence_plus_margin():
    text = ("Intro sentence. " + "x" * 500 + ". The camp near Goma flooded. "
            + "y" * 500 + ". Outro.")
    doc = Document(id="d", text=text)
    start = text.index("Goma")
    span = TagSpan(start, start + 4, "Goma")
    ctx = context_window(doc, span, margin=40)
    assert "The camp near Goma flooded." in ctx
    assert len(ctx) <= len("The camp near Goma flooded.") + 2 * 40 + 2
    assert "Intro" not in ctx


def test_context_window_whole_short_doc():
    doc = Document(id="d", text="Goma is calm.")
    ctx = context_window(doc, TagSpan(0, 4, "Goma"))
    assert ctx == "Goma is calm."
