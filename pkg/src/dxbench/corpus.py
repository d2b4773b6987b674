"""Clinical case corpus: sectioned discharge notes, redacted views, and
difficulty-stratified session plans.

A note must contain each of the 12 required section headings exactly once.
The ground-truth section (discharge diagnosis) is never rendered into any
assistant- or physician-facing view; reference diagnoses travel separately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class SectionName(str, Enum):
    CHIEF_COMPLAINT = "chief_complaint"
    HISTORY_OF_PRESENT_ILLNESS = "history_of_present_illness"
    SOCIAL_HISTORY = "social_history"
    PHYSICAL_EXAM = "physical_exam"
    PERTINENT_RESULTS = "pertinent_results"
    MAJOR_SURGICAL_OR_INVASIVE_PROCEDURE = "major_surgical_or_invasive_procedure"
    BRIEF_HOSPITAL_COURSE = "brief_hospital_course"
    MEDICATIONS_ON_ADMISSION = "medications_on_admission"
    DISCHARGE_MEDICATIONS = "discharge_medications"
    DISCHARGE_DIAGNOSIS = "discharge_diagnosis"
    DISCHARGE_CONDITION = "discharge_condition"
    DISCHARGE_INSTRUCTIONS = "discharge_instructions"

    @property
    def heading(self) -> str:
        """Display heading, e.g. "Chief Complaint"."""
        return self.value.replace("_", " ").title()


CANONICAL_ORDER: tuple[SectionName, ...] = tuple(SectionName)

# lowercase heading text -> section, for parse-time recognition
_HEADING_LOOKUP = {s.value.replace("_", " "): s for s in SectionName}


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class Condition(str, Enum):
    BASELINE = "baseline"
    INTERACTIVE = "interactive"


class MissingSectionError(ValueError):
    def __init__(self, name: SectionName, detail: str = "heading absent"):
        self.section = name
        super().__init__(f"missing section {name.value}: {detail}")


class DuplicateSectionError(ValueError):
    def __init__(self, name: SectionName):
        self.section = name
        super().__init__(f"duplicate section {name.value}")


class CorpusParseError(ValueError):
    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {detail}")


class CaseValidationError(ValueError):
    def __init__(self, case_id: str, reason: str):
        self.case_id = case_id
        super().__init__(f"case {case_id}: {reason}")


class InsufficientStratumError(ValueError):
    def __init__(self, difficulty: Difficulty, have: int, need: int):
        self.difficulty = difficulty
        self.have = have
        self.need = need
        super().__init__(f"stratum {difficulty.value}: have {have} cases, need {need}")


@dataclass(frozen=True)
class SectionedNote:
    """Ordered map of the 12 required sections to their text bodies."""

    sections: dict[SectionName, str]
    raw_length: int = 0

    def body(self, name: SectionName) -> str:
        return self.sections[name]


def _match_heading(line: str) -> SectionName | None:
    text = line.strip().lower()
    if text.endswith(":"):
        text = text[:-1].strip()
    return _HEADING_LOOKUP.get(text)


def parse_note(raw: str) -> SectionedNote:
    """Split raw note text into the 12 required sections.

    A heading is a line that, lowercased, trimmed, and with one trailing
    colon stripped, equals a canonical heading. The body runs until the next
    recognized heading. A present heading with an empty body counts as
    missing.
    """
    found: dict[SectionName, list[str]] = {}
    current: SectionName | None = None
    for line in raw.splitlines():
        section = _match_heading(line)
        if section is not None:
            if section in found:
                raise DuplicateSectionError(section)
            found[section] = []
            current = section
        elif current is not None:
            found[current].append(line)
    sections: dict[SectionName, str] = {}
    for name in CANONICAL_ORDER:
        if name not in found:
            raise MissingSectionError(name)
        body = "\n".join(found[name]).strip()
        if not body:
            raise MissingSectionError(name, "heading present but body empty")
        sections[name] = body
    return SectionedNote(sections=sections, raw_length=len(raw))


def serialize_note(note: SectionedNote) -> str:
    """Render a note with display headings; parse_note inverts this."""
    parts = [f"{name.heading}:\n{note.sections[name]}" for name in CANONICAL_ORDER]
    return "\n\n".join(parts) + "\n"


@dataclass(frozen=True)
class ClinicalCase:
    case_id: str
    note: SectionedNote
    reference_diagnoses: tuple[str, ...]
    difficulty: Difficulty

    def __post_init__(self) -> None:
        if not self.reference_diagnoses:
            raise CaseValidationError(self.case_id, "reference_diagnoses is empty")

    @property
    def chief_complaint(self) -> str:
        return self.note.sections[SectionName.CHIEF_COMPLAINT]


def _render(sections: Iterable[SectionName], note: SectionedNote) -> str:
    parts = []
    for name in sections:
        body = note.sections.get(name, "")
        parts.append(f"{name.heading}:\n{body}")
    return "\n\n".join(parts)


def assistant_view(case: ClinicalCase) -> str:
    """Full note minus the discharge diagnosis section, canonical order."""
    visible = [s for s in CANONICAL_ORDER if s is not SectionName.DISCHARGE_DIAGNOSIS]
    return _render(visible, case.note)


def physician_view(case: ClinicalCase, condition: Condition) -> str:
    """Interactive: chief complaint only. Baseline: the full redacted note."""
    if condition is Condition.INTERACTIVE:
        return _render([SectionName.CHIEF_COMPLAINT], case.note)
    return assistant_view(case)


def case_to_record(case: ClinicalCase) -> dict:
    return {
        "case_id": case.case_id,
        "difficulty": case.difficulty.value,
        "sections": {name.value: body for name, body in case.note.sections.items()},
        "reference_diagnoses": list(case.reference_diagnoses),
    }


def case_from_record(record: dict) -> ClinicalCase:
    case_id = record.get("case_id")
    if not case_id or not isinstance(case_id, str):
        raise CaseValidationError(str(case_id), "case_id missing or not a string")
    try:
        difficulty = Difficulty(record["difficulty"])
    except (KeyError, ValueError):
        raise CaseValidationError(case_id, f"bad difficulty {record.get('difficulty')!r}")
    raw_sections = record.get("sections")
    if not isinstance(raw_sections, dict):
        raise CaseValidationError(case_id, "sections missing or not an object")
    sections: dict[SectionName, str] = {}
    for name in CANONICAL_ORDER:
        body = raw_sections.get(name.value)
        if body is None:
            raise CaseValidationError(case_id, f"missing section {name.value}")
        if not isinstance(body, str) or not body.strip():
            raise CaseValidationError(case_id, f"empty section {name.value}")
        sections[name] = body.strip()
    unknown = set(raw_sections) - {name.value for name in CANONICAL_ORDER}
    if unknown:
        raise CaseValidationError(case_id, f"unknown sections {sorted(unknown)}")
    refs = record.get("reference_diagnoses")
    if not isinstance(refs, list) or not refs or not all(isinstance(r, str) and r.strip() for r in refs):
        raise CaseValidationError(case_id, "reference_diagnoses must be a non-empty list of strings")
    note = SectionedNote(sections=sections, raw_length=sum(len(b) for b in sections.values()))
    return ClinicalCase(case_id, note, tuple(r.strip() for r in refs), difficulty)


def load_corpus(path: str | Path) -> list[ClinicalCase]:
    """Read a line-delimited corpus file, validating every record."""
    cases = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(line_no, str(exc))
            case = case_from_record(record)
            if case.case_id in seen:
                raise CaseValidationError(case.case_id, "duplicate case_id")
            seen.add(case.case_id)
            cases.append(case)
    return cases


def save_corpus(cases: Iterable[ClinicalCase], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case_to_record(case)) + "\n")


SESSION_SIZE = 13
DEFAULT_COMPOSITION: dict[Difficulty, int] = {
    Difficulty.EASY: 3,
    Difficulty.MEDIUM: 6,
    Difficulty.HARD: 4,
}


@dataclass(frozen=True)
class SessionPlan:
    session_id: str
    condition: Condition
    case_ids: tuple[str, ...]
    composition: dict[Difficulty, int]

    def __post_init__(self) -> None:
        if len(self.case_ids) != SESSION_SIZE:
            raise ValueError(f"plan must hold {SESSION_SIZE} cases, got {len(self.case_ids)}")
        if sum(self.composition.values()) != SESSION_SIZE:
            raise ValueError("composition counts must sum to 13")


def build_session_plan(
    cases: Sequence[ClinicalCase],
    condition: Condition,
    composition: dict[Difficulty, int] | None = None,
    seed: int = 42,
    session_id: str = "S1",
) -> SessionPlan:
    """Stratified 13-case sample: seeded shuffle within each stratum, then a
    deterministic easy/medium/hard round-robin interleave."""
    composition = dict(composition or DEFAULT_COMPOSITION)
    if sum(composition.values()) != SESSION_SIZE:
        raise ValueError("composition counts must sum to 13")
    rng = np.random.default_rng(seed)
    picked: dict[Difficulty, list[str]] = {}
    for difficulty in Difficulty:
        need = composition.get(difficulty, 0)
        pool = [c.case_id for c in cases if c.difficulty is difficulty]
        if len(pool) < need:
            raise InsufficientStratumError(difficulty, len(pool), need)
        order = rng.permutation(len(pool))
        picked[difficulty] = [pool[k] for k in order[:need]]
    case_ids: list[str] = []
    queues = {d: list(ids) for d, ids in picked.items()}
    while any(queues.values()):
        for difficulty in Difficulty:
            if queues[difficulty]:
                case_ids.append(queues[difficulty].pop(0))
    return SessionPlan(session_id, condition, tuple(case_ids), composition)


def plan_to_record(plan: SessionPlan) -> dict:
    return {
        "session_id": plan.session_id,
        "condition": plan.condition.value,
        "case_ids": list(plan.case_ids),
        "composition": {d.value: n for d, n in plan.composition.items()},
    }


def plan_from_record(record: dict) -> SessionPlan:
    return SessionPlan(
        session_id=record["session_id"],
        condition=Condition(record["condition"]),
        case_ids=tuple(record["case_ids"]),
        composition={Difficulty(d): n for d, n in record["composition"].items()},
    )


def load_plan(path: str | Path) -> SessionPlan:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return plan_from_record(json.loads(line))
    raise ValueError(f"no plan record in {path}")


def save_plan(plan: SessionPlan, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(plan_to_record(plan)) + "\n")
