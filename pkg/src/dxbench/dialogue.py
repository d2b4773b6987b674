"""Encounter state machine: prompt rendering, physician message handling,
final-answer and tool-call parsing, and the fully simulated chief-physician
loop used for model ablations.

Live encounters end when the physician types a final answer ("final answer:"
or "final diagnosis:", ";"-separated) or "exit". Simulated encounters end
when the chief model emits a JSON tool call carrying the diagnosis.
"""

from __future__ import annotations

import itertools
import json
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable, Protocol, Sequence

from dxbench.corpus import ClinicalCase, Condition, assistant_view, physician_view


class Role(str, Enum):
    PHYSICIAN = "physician"
    ASSISTANT = "assistant"
    SYSTEM = "system"


class Expertise(str, Enum):
    SENIOR = "senior"
    RESIDENT = "resident"


class EncounterStatus(str, Enum):
    OPEN = "open"
    FINALIZED = "finalized"
    ABORTED = "aborted"


class EncounterClosedError(RuntimeError):
    pass


class BaselineQueryError(ValueError):
    """Baseline encounters accept only final answers or exit."""


class UpstreamError(RuntimeError):
    """LLM endpoint transport or protocol failure."""


class TemplateError(ValueError):
    pass


class EmptyAnswerError(ValueError):
    pass


class ToolCallError(ValueError):
    pass


class NoToolCallError(ToolCallError):
    pass


class MalformedToolCallError(ToolCallError):
    pass


class NoFinalAnswerError(RuntimeError):
    """Simulated chief never produced a parseable tool call."""


class ChatClient(Protocol):
    """Stateless chat-completion capability; full history resent per call."""

    def complete(self, messages: list[dict[str, str]]) -> str: ...


class EventSink(Protocol):
    def append(self, encounter_id: str, record: dict) -> None: ...


Clock = Callable[[], float]


@dataclass(frozen=True)
class LlmEndpointConfig:
    model_id: str
    base_url: str
    temperature: float = 0.7
    api_key_env_var: str | None = None
    timeout_seconds: float = 120.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")


@dataclass
class DialogueTurn:
    role: Role
    text: str
    timestamp: float
    question_type: str | None = None


@dataclass
class EncounterState:
    encounter_id: str
    participant_id: str
    expertise: Expertise
    case_id: str
    condition: Condition
    session_id: str
    started_at: float
    turns: list[DialogueTurn] = field(default_factory=list)
    status: EncounterStatus = EncounterStatus.OPEN


@dataclass(frozen=True)
class EncounterLog:
    encounter_id: str
    participant_id: str
    expertise: Expertise
    case_id: str
    condition: Condition
    session_id: str
    started_at: float
    turns: tuple[DialogueTurn, ...]
    status: EncounterStatus
    final_diagnoses: tuple[str, ...]
    elapsed_minutes: float


@dataclass(frozen=True)
class AssistantReply:
    turn: DialogueTurn


@dataclass(frozen=True)
class FinalAnswer:
    diagnoses: tuple[str, ...]
    log: EncounterLog


@dataclass(frozen=True)
class Exit:
    log: EncounterLog


def new_encounter(
    case_id: str,
    participant_id: str,
    expertise: Expertise,
    condition: Condition,
    session_id: str,
    encounter_id: str | None = None,
    clock: Clock = time.time,
) -> EncounterState:
    return EncounterState(
        encounter_id=encounter_id or uuid.uuid4().hex,
        participant_id=participant_id,
        expertise=expertise,
        case_id=case_id,
        condition=condition,
        session_id=session_id,
        started_at=clock(),
    )


# --- prompt templates -------------------------------------------------------

TEMPLATE_PACKAGE = "dxbench.templates"

LIVE_ASSISTANT_TEMPLATE = "assistant_live.txt"
LIVE_PHYSICIAN_TEMPLATES = {
    Condition.BASELINE: "physician_baseline_live.txt",
    Condition.INTERACTIVE: "physician_interactive_live.txt",
}

NOTE_PLACEHOLDER = "{clinicalNote}"


def load_template(name: str) -> str:
    return resources.files(TEMPLATE_PACKAGE).joinpath(name).read_text(encoding="utf-8")


def fill_note(template: str, note_text: str) -> str:
    """Substitute the clinical-note placeholder.

    Plain replace, not str.format: templates legitimately contain literal
    JSON braces.
    """
    if NOTE_PLACEHOLDER not in template:
        raise TemplateError(f"template lacks {NOTE_PLACEHOLDER} placeholder")
    return template.replace(NOTE_PLACEHOLDER, note_text)


def render_assistant_prompt(case: ClinicalCase, template: str | None = None) -> str:
    """System prompt for the live assistant over the redacted note."""
    if template is None:
        template = load_template(LIVE_ASSISTANT_TEMPLATE)
    return fill_note(template, assistant_view(case))


def physician_instructions(condition: Condition) -> str:
    return load_template(LIVE_PHYSICIAN_TEMPLATES[condition])


# --- final answers and exit -------------------------------------------------

FINAL_PREFIXES = ("final answer:", "final diagnosis:")
EXIT_COMMAND = "exit"


def split_final_prefix(text: str) -> str | None:
    """Remainder after a final-answer prefix, or None if text is not final."""
    stripped = text.lstrip()
    lowered = stripped.lower()
    for prefix in FINAL_PREFIXES:
        if lowered.startswith(prefix):
            return stripped[len(prefix):]
    return None


def is_final_answer(text: str) -> bool:
    return split_final_prefix(text) is not None


def is_exit(text: str) -> bool:
    return text.strip().lower() == EXIT_COMMAND


def parse_final_diagnoses(text: str) -> list[str]:
    """Strip the final-answer prefix and split diagnoses on ";"."""
    remainder = split_final_prefix(text)
    if remainder is None:
        raise ValueError("text does not start with a final-answer prefix")
    items = [part.strip() for part in remainder.split(";")]
    items = [part for part in items if part]
    if not items:
        raise EmptyAnswerError("final answer contains no diagnoses")
    return items


# --- lifecycle --------------------------------------------------------------

def _to_log(state: EncounterState, diagnoses: Sequence[str], ended_at: float) -> EncounterLog:
    return EncounterLog(
        encounter_id=state.encounter_id,
        participant_id=state.participant_id,
        expertise=state.expertise,
        case_id=state.case_id,
        condition=state.condition,
        session_id=state.session_id,
        started_at=state.started_at,
        turns=tuple(state.turns),
        status=state.status,
        final_diagnoses=tuple(diagnoses),
        elapsed_minutes=(ended_at - state.started_at) / 60.0,
    )


def finalize_encounter(
    state: EncounterState,
    diagnoses: Sequence[str],
    *,
    raw_text: str = "",
    clock: Clock = time.time,
    store: EventSink | None = None,
) -> EncounterLog:
    """Close an open encounter with its final diagnosis list."""
    if state.status is not EncounterStatus.OPEN:
        raise EncounterClosedError(f"encounter {state.encounter_id} is {state.status.value}")
    diagnoses = [d.strip() for d in diagnoses if d.strip()]
    if not diagnoses:
        raise EmptyAnswerError("cannot finalize without diagnoses")
    ended_at = clock()
    state.status = EncounterStatus.FINALIZED
    log = _to_log(state, diagnoses, ended_at)
    if store is not None:
        store.append(state.encounter_id, {
            "event": "finalized",
            "text": raw_text,
            "diagnoses": list(diagnoses),
            "timestamp": ended_at,
            "elapsed_minutes": log.elapsed_minutes,
        })
    return log


def abort_encounter(
    state: EncounterState,
    *,
    clock: Clock = time.time,
    store: EventSink | None = None,
) -> EncounterLog:
    if state.status is not EncounterStatus.OPEN:
        raise EncounterClosedError(f"encounter {state.encounter_id} is {state.status.value}")
    ended_at = clock()
    state.status = EncounterStatus.ABORTED
    log = _to_log(state, (), ended_at)
    if store is not None:
        store.append(state.encounter_id, {"event": "aborted", "timestamp": ended_at})
    return log


def _history_messages(system_prompt: str, turns: Sequence[DialogueTurn]) -> list[dict[str, str]]:
    messages = [{"role": "system", "content": system_prompt}]
    for turn in turns:
        role = "user" if turn.role is Role.PHYSICIAN else "assistant"
        messages.append({"role": role, "content": turn.text})
    return messages


def post_physician_message(
    state: EncounterState,
    text: str,
    client: ChatClient | None = None,
    *,
    system_prompt: str | None = None,
    clock: Clock = time.time,
    store: EventSink | None = None,
) -> AssistantReply | FinalAnswer | Exit:
    """Handle one physician message.

    Final answers finalize the encounter, "exit" aborts it, and any other
    message in the interactive condition is relayed to the assistant with the
    full history. Baseline encounters reject plain messages. A transport
    failure leaves the encounter open with no new turns (the attempt is
    recorded as an error event).
    """
    if state.status is not EncounterStatus.OPEN:
        raise EncounterClosedError(f"encounter {state.encounter_id} is {state.status.value}")
    if not text.strip():
        raise EmptyAnswerError("empty physician message")

    if is_exit(text):
        return Exit(abort_encounter(state, clock=clock, store=store))

    if is_final_answer(text):
        diagnoses = parse_final_diagnoses(text)
        log = finalize_encounter(state, diagnoses, raw_text=text, clock=clock, store=store)
        return FinalAnswer(tuple(diagnoses), log)

    if state.condition is Condition.BASELINE:
        raise BaselineQueryError(
            "baseline encounters accept only final answers or exit"
        )

    if client is None or system_prompt is None:
        raise ValueError("interactive relay requires a chat client and system prompt")

    ask_ts = clock()
    pending = DialogueTurn(Role.PHYSICIAN, text, ask_ts)
    try:
        reply_text = client.complete(_history_messages(system_prompt, [*state.turns, pending]))
    except UpstreamError as exc:
        if store is not None:
            store.append(state.encounter_id, {
                "event": "error",
                "text": text,
                "detail": str(exc),
                "timestamp": clock(),
            })
        raise
    reply = DialogueTurn(Role.ASSISTANT, reply_text, clock())
    state.turns.append(pending)
    state.turns.append(reply)
    if store is not None:
        store.append(state.encounter_id, {
            "event": "turn", "role": pending.role.value,
            "text": pending.text, "timestamp": pending.timestamp,
        })
        store.append(state.encounter_id, {
            "event": "turn", "role": reply.role.value,
            "text": reply.text, "timestamp": reply.timestamp,
        })
    return AssistantReply(reply)


# --- tool calls (simulated chief) -------------------------------------------

TOOL_REQUESTS = ("discharge_text_tool", "baseline_discharge_text_tool")


def _balanced_objects(text: str):
    # Yields each top-level {...} span, honoring string literals and escapes.
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for pos, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = pos
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    yield text[start:pos + 1]


def _split_diagnosis_value(value) -> list[str]:
    if isinstance(value, str):
        parts = itertools.chain.from_iterable(p.split(";") for p in value.splitlines())
    elif isinstance(value, list) and all(isinstance(v, str) for v in value):
        parts = value
    else:
        raise MalformedToolCallError("diagnosis must be a string or list of strings")
    items = [p.strip() for p in parts]
    return [p for p in items if p]


def parse_tool_call(text: str) -> list[str]:
    """Extract the diagnosis list from the first discharge-text tool call.

    Scans for balanced object literals (fenced or bare, surrounded by any
    amount of prose), accepts the interactive and baseline request names, and
    takes dischargeText.diagnosis as a list or a newline/";"-separated string.
    """
    for candidate in _balanced_objects(text):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict) or obj.get("request") not in TOOL_REQUESTS:
            continue
        discharge = obj.get("dischargeText")
        if not isinstance(discharge, dict) or "diagnosis" not in discharge:
            raise MalformedToolCallError("tool call lacks dischargeText.diagnosis")
        items = _split_diagnosis_value(discharge["diagnosis"])
        if not items:
            raise MalformedToolCallError("tool call carries no diagnoses")
        return items
    raise NoToolCallError("no discharge-text tool call found")


# --- simulated encounters ----------------------------------------------------

@dataclass(frozen=True)
class SimPrompts:
    chief_baseline: str
    chief_interactive: str
    assistant: str

    @classmethod
    def load(cls, profile: str = "default") -> "SimPrompts":
        prefix = {"default": "sim", "legacy": "sim_legacy"}[profile]
        return cls(
            chief_baseline=load_template(f"{prefix}_chief_baseline.txt"),
            chief_interactive=load_template(f"{prefix}_chief_interactive.txt"),
            assistant=load_template(f"{prefix}_assistant.txt"),
        )


FORCED_FINAL_REQUEST = (
    "You have reached the discussion limit. Output the discharge diagnosis "
    "now, using only the required JSON tool-call format."
)


class TickClock:
    """Deterministic clock for simulations: epoch + 1 second per reading."""

    def __init__(self, epoch: float = 0.0, step: float = 1.0):
        self._now = epoch
        self._step = step

    def __call__(self) -> float:
        now = self._now
        self._now += self._step
        return now


def run_simulated_encounter(
    chief_client: ChatClient,
    assistant_client: ChatClient,
    case: ClinicalCase,
    scenario: Condition,
    max_turns: int = 20,
    *,
    prompts: SimPrompts | None = None,
    participant_id: str = "sim-chief",
    expertise: Expertise = Expertise.SENIOR,
    session_id: str = "SIM",
    encounter_id: str | None = None,
    clock: Clock | None = None,
    store: EventSink | None = None,
) -> EncounterLog:
    """Drive a chief-physician model against the assistant model on one case.

    Baseline: one chief call over the full redacted note, expecting an
    immediate tool call. Interactive: the chief sees the chief complaint
    only and converses with the assistant until it emits a tool call; after
    max_turns exchanges a single forced final request is issued.
    """
    if max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    prompts = prompts or SimPrompts.load()
    clock = clock or TickClock()
    state = new_encounter(
        case.case_id, participant_id, expertise, scenario, session_id,
        encounter_id=encounter_id, clock=clock,
    )
    if store is not None:
        store.append(state.encounter_id, {
            "event": "created",
            "participant_id": participant_id,
            "expertise": expertise.value,
            "case_id": case.case_id,
            "condition": scenario.value,
            "session_id": session_id,
            "timestamp": state.started_at,
        })

    def record(role: Role, text: str) -> DialogueTurn:
        turn = DialogueTurn(role, text, clock())
        state.turns.append(turn)
        if store is not None:
            store.append(state.encounter_id, {
                "event": "turn", "role": role.value,
                "text": text, "timestamp": turn.timestamp,
            })
        return turn

    def try_finalize(chief_text: str) -> EncounterLog | None:
        try:
            diagnoses = parse_tool_call(chief_text)
        except ToolCallError:
            return None
        return finalize_encounter(state, diagnoses, raw_text=chief_text, clock=clock, store=store)

    if scenario is Condition.BASELINE:
        prompt = fill_note(prompts.chief_baseline, assistant_view(case))
        chief_text = chief_client.complete([{"role": "user", "content": prompt}])
        record(Role.PHYSICIAN, chief_text)
        log = try_finalize(chief_text)
        if log is None:
            abort_encounter(state, clock=clock, store=store)
            raise NoFinalAnswerError("baseline chief produced no tool call")
        return log

    chief_messages = [{
        "role": "system",
        "content": fill_note(prompts.chief_interactive, physician_view(case, Condition.INTERACTIVE)),
    }]
    assistant_messages = [{
        "role": "system",
        "content": fill_note(prompts.assistant, assistant_view(case)),
    }]
    for _ in range(max_turns):
        chief_text = chief_client.complete(chief_messages)
        record(Role.PHYSICIAN, chief_text)
        log = try_finalize(chief_text)
        if log is not None:
            return log
        chief_messages.append({"role": "assistant", "content": chief_text})
        assistant_messages.append({"role": "user", "content": chief_text})
        assistant_text = assistant_client.complete(assistant_messages)
        record(Role.ASSISTANT, assistant_text)
        assistant_messages.append({"role": "assistant", "content": assistant_text})
        chief_messages.append({"role": "user", "content": assistant_text})

    chief_messages.append({"role": "user", "content": FORCED_FINAL_REQUEST})
    chief_text = chief_client.complete(chief_messages)
    record(Role.PHYSICIAN, chief_text)
    log = try_finalize(chief_text)
    if log is None:
        abort_encounter(state, clock=clock, store=store)
        raise NoFinalAnswerError("chief produced no tool call after the forced request")
    return log


def is_final_turn(turn: DialogueTurn) -> bool:
    """True for physician turns that end an encounter (final answer or tool call)."""
    if turn.role is not Role.PHYSICIAN:
        return False
    if is_final_answer(turn.text):
        return True
    try:
        parse_tool_call(turn.text)
    except ToolCallError:
        return False
    return True


def fahrenheit_to_celsius(fahrenheit: float) -> float:
    """Convert for display, rounded to one decimal."""
    return round((fahrenheit - 32.0) * 5.0 / 9.0, 1)
