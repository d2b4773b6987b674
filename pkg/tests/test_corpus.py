import json

import pytest

from dxbench.corpus import (
    CANONICAL_ORDER,
    DEFAULT_COMPOSITION,
    SESSION_SIZE,
    CaseValidationError,
    ClinicalCase,
    Condition,
    CorpusParseError,
    Difficulty,
    DuplicateSectionError,
    InsufficientStratumError,
    MissingSectionError,
    SectionName,
    assistant_view,
    build_session_plan,
    case_from_record,
    case_to_record,
    load_corpus,
    load_plan,
    parse_note,
    physician_view,
    plan_from_record,
    plan_to_record,
    save_corpus,
    save_plan,
    serialize_note,
)
from conftest import build_corpus_cases


def test_twelve_canonical_sections():
    assert len(CANONICAL_ORDER) == 12
    assert CANONICAL_ORDER[0] is SectionName.CHIEF_COMPLAINT
    assert SectionName.DISCHARGE_DIAGNOSIS in CANONICAL_ORDER


def test_headings_roundtrip():
    assert SectionName.CHIEF_COMPLAINT.heading == "Chief Complaint"
    assert SectionName.HISTORY_OF_PRESENT_ILLNESS.heading == "History Of Present Illness"


def test_parse_note_roundtrip(corpus_cases):
    note = corpus_cases[0].note
    text = serialize_note(note)
    parsed = parse_note(text)
    assert parsed.sections == note.sections


def test_parse_note_heading_variants():
    bodies = {name: f"body {i}" for i, name in enumerate(CANONICAL_ORDER)}
    lines = []
    # heading without colon and with odd casing must still be recognized
    for name in CANONICAL_ORDER:
        heading = name.heading.upper() if name is SectionName.CHIEF_COMPLAINT else name.heading + ":"
        lines.append(heading)
        lines.append(bodies[name])
        lines.append("")
    parsed = parse_note("\n".join(lines))
    assert parsed.sections[SectionName.CHIEF_COMPLAINT] == "body 0"


def test_parse_note_missing_section():
    text = "Chief Complaint:\nCough\n"
    with pytest.raises(MissingSectionError):
        parse_note(text)


def test_parse_note_empty_body_is_missing(corpus_cases):
    text = serialize_note(corpus_cases[0].note)
    text = text.replace(
        "Social History:\nLives at home. Former smoker, quit ten years ago. No alcohol.",
        "Social History:",
    )
    with pytest.raises(MissingSectionError) as err:
        parse_note(text)
    assert "social_history" in str(err.value)


def test_parse_note_duplicate_heading(corpus_cases):
    text = serialize_note(corpus_cases[0].note) + "\nChief Complaint:\nagain\n"
    with pytest.raises(DuplicateSectionError):
        parse_note(text)


def test_assistant_view_redacts_diagnosis(corpus_cases):
    case = corpus_cases[0]
    view = assistant_view(case)
    assert "Community-acquired pneumonia" not in view
    assert "Discharge Diagnosis" not in view
    assert case.chief_complaint in view
    # the other 11 sections are retained
    for name in CANONICAL_ORDER:
        if name is SectionName.DISCHARGE_DIAGNOSIS:
            continue
        assert name.heading + ":" in view


def test_physician_view_interactive_masks_everything_but_chief(corpus_cases):
    case = corpus_cases[3]
    view = physician_view(case, Condition.INTERACTIVE)
    assert case.chief_complaint in view
    assert "Chief Complaint:" in view
    assert "History Of Present Illness" not in view
    assert "Pertinent Results" not in view


def test_physician_view_baseline_equals_assistant_view(corpus_cases):
    case = corpus_cases[3]
    assert physician_view(case, Condition.BASELINE) == assistant_view(case)


def test_case_record_roundtrip(corpus_cases):
    case = corpus_cases[5]
    record = case_to_record(case)
    again = case_from_record(record)
    assert again == case


def test_case_from_record_rejects_unknown_section(corpus_cases):
    record = case_to_record(corpus_cases[0])
    record["sections"]["surprise_section"] = "nope"
    with pytest.raises(CaseValidationError):
        case_from_record(record)


def test_case_from_record_rejects_missing_refs(corpus_cases):
    record = case_to_record(corpus_cases[0])
    record["reference_diagnoses"] = []
    with pytest.raises(CaseValidationError):
        case_from_record(record)


def test_case_from_record_rejects_bad_difficulty(corpus_cases):
    record = case_to_record(corpus_cases[0])
    record["difficulty"] = "impossible"
    with pytest.raises(CaseValidationError):
        case_from_record(record)


def test_load_corpus_roundtrip(tmp_path, corpus_cases):
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus_cases, path)
    loaded = load_corpus(path)
    assert loaded == corpus_cases


def test_load_corpus_rejects_duplicates(tmp_path, corpus_cases):
    path = tmp_path / "corpus.jsonl"
    save_corpus([corpus_cases[0], corpus_cases[0]], path)
    with pytest.raises(CaseValidationError):
        load_corpus(path)


def test_load_corpus_parse_error_carries_line(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"case_id": "a"}\nnot json\n', encoding="utf-8")
    with pytest.raises((CorpusParseError, CaseValidationError)):
        load_corpus(path)


def test_build_session_plan_composition(corpus_cases):
    plan = build_session_plan(corpus_cases, Condition.BASELINE, seed=42, session_id="S1")
    assert len(plan.case_ids) == SESSION_SIZE
    assert len(set(plan.case_ids)) == SESSION_SIZE
    by_difficulty = {c.case_id: c.difficulty for c in corpus_cases}
    counts = {d: 0 for d in Difficulty}
    for case_id in plan.case_ids:
        counts[by_difficulty[case_id]] += 1
    assert counts == DEFAULT_COMPOSITION


def test_build_session_plan_deterministic(corpus_cases):
    a = build_session_plan(corpus_cases, Condition.BASELINE, seed=42)
    b = build_session_plan(corpus_cases, Condition.BASELINE, seed=42)
    assert a.case_ids == b.case_ids


def test_build_session_plan_interleaves_difficulties(corpus_cases):
    plan = build_session_plan(corpus_cases, Condition.INTERACTIVE, seed=1)
    by_difficulty = {c.case_id: c.difficulty for c in corpus_cases}
    first_three = [by_difficulty[c] for c in plan.case_ids[:3]]
    assert first_three == [Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD]


def test_build_session_plan_insufficient_stratum(corpus_cases):
    thin = [c for c in corpus_cases if c.difficulty is not Difficulty.HARD]
    with pytest.raises(InsufficientStratumError):
        build_session_plan(thin, Condition.BASELINE)


def test_plan_record_roundtrip(tmp_path, corpus_cases):
    plan = build_session_plan(corpus_cases, Condition.INTERACTIVE, seed=3, session_id="S9")
    assert plan_from_record(plan_to_record(plan)) == plan
    path = tmp_path / "plan.jsonl"
    save_plan(plan, path)
    assert load_plan(path) == plan


def test_plan_validates_size():
    with pytest.raises(ValueError):
        plan_from_record({
            "session_id": "S1",
            "condition": "baseline",
            "case_ids": ["a", "b"],
            "composition": {"easy": 1, "medium": 1, "hard": 0},
        })


def test_clinical_case_requires_refs(corpus_cases):
    with pytest.raises(CaseValidationError):
        ClinicalCase(
            case_id="x",
            note=corpus_cases[0].note,
            reference_diagnoses=(),
            difficulty=Difficulty.EASY,
        )


def test_synthetic_corpus_shape():
    cases = build_corpus_cases()
    assert len(cases) == 13
    counts = {d: 0 for d in Difficulty}
    for c in cases:
        counts[c.difficulty] += 1
    assert counts == {Difficulty.EASY: 3, Difficulty.MEDIUM: 6, Difficulty.HARD: 4}
    # every case parses back through the strict record validator
    for c in cases:
        case_from_record(json.loads(json.dumps(case_to_record(c))))
