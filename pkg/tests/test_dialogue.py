import json

import pytest

from dxbench.corpus import Condition
from dxbench.dialogue import (
    BaselineQueryError,
    EmptyAnswerError,
    EncounterClosedError,
    EncounterStatus,
    Exit,
    Expertise,
    FinalAnswer,
    AssistantReply,
    MalformedToolCallError,
    NoFinalAnswerError,
    NoToolCallError,
    Role,
    SimPrompts,
    TickClock,
    UpstreamError,
    fahrenheit_to_celsius,
    fill_note,
    finalize_encounter,
    is_exit,
    is_final_answer,
    is_final_turn,
    load_template,
    new_encounter,
    parse_final_diagnoses,
    parse_tool_call,
    physician_instructions,
    post_physician_message,
    render_assistant_prompt,
    run_simulated_encounter,
)
from dxbench.llm import ScriptedChatClient
from conftest import build_corpus_cases

CASES = build_corpus_cases()


def make_encounter(condition=Condition.INTERACTIVE, case=None):
    return new_encounter(
        case_id=(case or CASES[0]).case_id,
        participant_id="p1",
        expertise=Expertise.SENIOR,
        condition=condition,
        session_id="S1",
        encounter_id="e1",
        clock=lambda: 0.0,
    )


# -- final answer parsing --------------------------------------------------------

def test_final_answer_prefixes():
    assert is_final_answer("final answer: pneumonia")
    assert is_final_answer("Final Diagnosis: pneumonia")
    assert is_final_answer("  FINAL ANSWER:pneumonia")
    assert not is_final_answer("my final answer: pneumonia")
    assert not is_final_answer("what is the final answer?")


def test_parse_final_diagnoses_paper_example():
    out = parse_final_diagnoses("final answer: Diagnosis 1; Diagnosis 2")
    assert out == ["Diagnosis 1", "Diagnosis 2"]


def test_parse_final_diagnoses_trims_and_drops_empties():
    assert parse_final_diagnoses("final answer: a ;; b ; ") == ["a", "b"]
    with pytest.raises(EmptyAnswerError):
        parse_final_diagnoses("final answer: ; ;")


def test_parse_final_reparse_idempotent():
    items = parse_final_diagnoses(
        "final answer: acute post traumatic headache; community-acquired pneumonia"
    )
    assert items == ["acute post traumatic headache", "community-acquired pneumonia"]
    assert parse_final_diagnoses("final answer: " + "; ".join(items)) == items


def test_is_exit():
    assert is_exit("exit")
    assert is_exit("  EXIT  ")
    assert not is_exit("exit now")


# -- tool call parsing -------------------------------------------------------------

SUPP_TOOLCALL = """Based on the note I am confident in the assessment.

```json
{
  "request": "discharge_text_tool",
  "dischargeText": {
    "diagnosis": "Right lower lobe community-acquired pneumonia\\nCOPD exacerbation"
  }
}
```
"""


def test_parse_tool_call_paper_example():
    assert parse_tool_call(SUPP_TOOLCALL) == [
        "Right lower lobe community-acquired pneumonia",
        "COPD exacerbation",
    ]


def test_parse_tool_call_baseline_request_and_list_value():
    text = json.dumps({
        "request": "baseline_discharge_text_tool",
        "dischargeText": {"diagnosis": ["A", " B ", ""]},
    })
    assert parse_tool_call(text) == ["A", "B"]


def test_parse_tool_call_semicolon_string():
    text = json.dumps({
        "request": "discharge_text_tool",
        "dischargeText": {"diagnosis": "one; two"},
    })
    assert parse_tool_call(text) == ["one", "two"]


def test_parse_tool_call_no_object():
    with pytest.raises(NoToolCallError):
        parse_tool_call("no structured content here")


def test_parse_tool_call_missing_discharge_text():
    with pytest.raises(MalformedToolCallError):
        parse_tool_call('{"request": "discharge_text_tool"}')


def test_parse_tool_call_wrong_request_ignored():
    with pytest.raises(NoToolCallError):
        parse_tool_call('{"request": "other_tool", "dischargeText": {"diagnosis": "x"}}')


def test_parse_tool_call_skips_prose_braces():
    text = 'Consider {hypoxia} first. {"request": "discharge_text_tool", "dischargeText": {"diagnosis": "PE"}}'
    assert parse_tool_call(text) == ["PE"]


# -- prompts ------------------------------------------------------------------------

def test_render_assistant_prompt_contains_note_and_guidance():
    case = CASES[0]
    prompt = render_assistant_prompt(case)
    assert "Not reported in note." in prompt
    assert case.chief_complaint in prompt
    assert "Community-acquired pneumonia" not in prompt  # redacted diagnosis


def test_fill_note_requires_placeholder():
    from dxbench.dialogue import TemplateError

    with pytest.raises(TemplateError):
        fill_note("no placeholder here", "text")


def test_physician_instructions_mention_protocol():
    baseline = physician_instructions(Condition.BASELINE)
    interactive = physician_instructions(Condition.INTERACTIVE)
    # baseline flow: type the diagnosis directly, ";"-separated, exit to stop
    assert "separated with ;" in baseline
    assert "exit" in baseline.lower()
    assert "no AI support" in baseline
    assert "final answer:" in interactive.lower()
    assert "final diagnosis:" in interactive.lower()


def test_templates_load():
    for name in (
        "assistant_live.txt",
        "sim_assistant.txt",
        "sim_chief_baseline.txt",
        "sim_chief_interactive.txt",
        "sim_legacy_assistant.txt",
        "judge_faithfulness.txt",
        "judge_relevancy.txt",
        "survey.json",
    ):
        assert load_template(name).strip()


def test_sim_prompt_profiles():
    default = SimPrompts.load("default")
    legacy = SimPrompts.load("legacy")
    assert "Dr. Ellis" in legacy.assistant
    assert default.assistant != legacy.assistant


# -- live encounter state machine ----------------------------------------------------

def test_post_message_relays_to_client():
    state = make_encounter()
    client = ScriptedChatClient(["The troponin is 0.02."])
    outcome = post_physician_message(
        state, "Troponin level?", client,
        system_prompt="sys", clock=TickClock(), store=None,
    )
    assert isinstance(outcome, AssistantReply)
    assert outcome.turn.text == "The troponin is 0.02."
    assert [t.role for t in state.turns] == [Role.PHYSICIAN, Role.ASSISTANT]
    # full history resent: system + 2 turns after one exchange
    assert client.calls[0][0]["role"] == "system"


def test_post_message_final_answer():
    state = make_encounter()
    outcome = post_physician_message(
        state, "final answer: Diagnosis 1; Diagnosis 2", None,
        clock=TickClock(), store=None,
    )
    assert isinstance(outcome, FinalAnswer)
    assert outcome.diagnoses == ("Diagnosis 1", "Diagnosis 2")
    assert state.status is EncounterStatus.FINALIZED
    assert outcome.log.final_diagnoses == ("Diagnosis 1", "Diagnosis 2")


def test_post_message_exit_aborts():
    state = make_encounter()
    outcome = post_physician_message(state, "exit", None, clock=TickClock(), store=None)
    assert isinstance(outcome, Exit)
    assert state.status is EncounterStatus.ABORTED


def test_post_message_rejects_baseline_queries():
    state = make_encounter(condition=Condition.BASELINE)
    with pytest.raises(BaselineQueryError):
        post_physician_message(state, "Any labs?", None, clock=TickClock(), store=None)
    # but final answers still work in baseline mode
    outcome = post_physician_message(
        state, "final diagnosis: X", None, clock=TickClock(), store=None
    )
    assert isinstance(outcome, FinalAnswer)


def test_post_message_closed_encounter():
    state = make_encounter()
    post_physician_message(state, "final answer: X", None, clock=TickClock(), store=None)
    with pytest.raises(EncounterClosedError):
        post_physician_message(state, "hello?", None, clock=TickClock(), store=None)


def test_upstream_failure_keeps_encounter_open():
    class FailingClient:
        def complete(self, messages):
            raise UpstreamError("gateway timeout")

    state = make_encounter()
    with pytest.raises(UpstreamError):
        post_physician_message(
            state, "Any imaging?", FailingClient(),
            system_prompt="sys", clock=TickClock(), store=None,
        )
    assert state.status is EncounterStatus.OPEN
    assert state.turns == []  # failed exchange records no turns


def test_finalize_computes_elapsed_minutes():
    state = make_encounter()
    clock = TickClock(epoch=120.0, step=0.0)
    log = finalize_encounter(state, ("X",), clock=clock, store=None)
    assert log.elapsed_minutes == pytest.approx(2.0)
    assert log.status is EncounterStatus.FINALIZED


def test_baseline_logs_have_no_assistant_turns():
    state = make_encounter(condition=Condition.BASELINE)
    outcome = post_physician_message(
        state, "final answer: X", None, clock=TickClock(), store=None
    )
    assert all(t.role is not Role.ASSISTANT for t in outcome.log.turns)


# -- simulated encounters -----------------------------------------------------------

def toolcall_text(case, request="discharge_text_tool"):
    return json.dumps({
        "request": request,
        "dischargeText": {"diagnosis": "\n".join(case.reference_diagnoses)},
    })


def test_simulated_baseline_single_call():
    case = CASES[0]
    chief = ScriptedChatClient([toolcall_text(case, "baseline_discharge_text_tool")])
    log = run_simulated_encounter(
        chief, ScriptedChatClient([]), case, Condition.BASELINE,
        clock=TickClock(), store=None,
    )
    assert log.final_diagnoses == case.reference_diagnoses
    assert len(log.turns) == 1
    assert len(chief.calls) == 1
    # the chief sees the redacted note, not the diagnosis section
    prompt = chief.calls[0][0]["content"]
    assert case.chief_complaint in prompt
    assert case.reference_diagnoses[0] not in prompt


def test_simulated_interactive_three_rounds_then_toolcall():
    case = CASES[1]
    chief = ScriptedChatClient([
        "Initial evaluation please.",
        "Any imaging findings?",
        "Is it acute or chronic?",
        toolcall_text(case),
    ])
    assistant = ScriptedChatClient(["A1", "A2", "A3"])
    log = run_simulated_encounter(
        chief, assistant, case, Condition.INTERACTIVE,
        clock=TickClock(), store=None,
    )
    # 3 question/answer rounds plus the tool-call message
    assert len(log.turns) == 7
    assert [t.role for t in log.turns] == [
        Role.PHYSICIAN, Role.ASSISTANT,
        Role.PHYSICIAN, Role.ASSISTANT,
        Role.PHYSICIAN, Role.ASSISTANT,
        Role.PHYSICIAN,
    ]
    assert log.final_diagnoses == case.reference_diagnoses
    assert is_final_turn(log.turns[-1])
    assert not is_final_turn(log.turns[0])


def test_simulated_interactive_chief_sees_only_chief_complaint():
    case = CASES[2]
    chief = ScriptedChatClient([toolcall_text(case)])
    log = run_simulated_encounter(
        chief, ScriptedChatClient(["unused"]), case, Condition.INTERACTIVE,
        clock=TickClock(), store=None,
    )
    system = chief.calls[0][0]["content"]
    assert case.chief_complaint in system
    assert "Pertinent Results" not in system
    assert log.status is EncounterStatus.FINALIZED


def test_simulated_encounter_deterministic():
    case = CASES[3]

    def run():
        chief = ScriptedChatClient(["Q1", toolcall_text(case)])
        assistant = ScriptedChatClient(["A1"])
        return run_simulated_encounter(
            chief, assistant, case, Condition.INTERACTIVE,
            clock=TickClock(), store=None, encounter_id="fixed",
        )

    a, b = run(), run()
    assert a == b


def test_simulated_max_turns_forced_request():
    case = CASES[4]
    # never finalizes: questions forever, even after the forced request
    chief = ScriptedChatClient(["Q"] * 10)
    assistant = ScriptedChatClient(["A"] * 10)
    with pytest.raises(NoFinalAnswerError):
        run_simulated_encounter(
            chief, assistant, case, Condition.INTERACTIVE, max_turns=3,
            clock=TickClock(), store=None,
        )
    # 3 looped calls plus one forced-final attempt
    assert len(chief.calls) == 4


def test_simulated_forced_request_can_still_finalize():
    case = CASES[5]
    chief = ScriptedChatClient(["Q1", "Q2", toolcall_text(case)])
    assistant = ScriptedChatClient(["A1", "A2"])
    log = run_simulated_encounter(
        chief, assistant, case, Condition.INTERACTIVE, max_turns=2,
        clock=TickClock(), store=None,
    )
    assert log.final_diagnoses == case.reference_diagnoses


def test_simulated_baseline_without_toolcall_raises():
    case = CASES[6]
    chief = ScriptedChatClient(["I think it is pneumonia."])
    with pytest.raises(NoFinalAnswerError):
        run_simulated_encounter(
            chief, ScriptedChatClient([]), case, Condition.BASELINE,
            clock=TickClock(), store=None,
        )


def test_history_grows_two_entries_per_exchange():
    case = CASES[7]
    chief = ScriptedChatClient(["Q1", "Q2", toolcall_text(case)])
    assistant = ScriptedChatClient(["A1", "A2"])
    run_simulated_encounter(
        chief, assistant, case, Condition.INTERACTIVE,
        clock=TickClock(), store=None,
    )
    lengths = [len(c) for c in chief.calls]
    assert lengths == [1, 3, 5]


# -- temperature conversion ------------------------------------------------------------

def test_fahrenheit_to_celsius():
    assert fahrenheit_to_celsius(98.6) == 37.0
    assert fahrenheit_to_celsius(32) == 0.0
    assert fahrenheit_to_celsius(-40) == -40.0
