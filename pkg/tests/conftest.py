import json
import random
from pathlib import Path

import pytest

from dxbench.corpus import (
    CANONICAL_ORDER,
    ClinicalCase,
    Difficulty,
    SectionName,
    SectionedNote,
    save_corpus,
)

# 3 easy / 6 medium / 4 hard, matching the default session composition
CASE_SPECS = [
    ("easy", "Productive cough and fever", ["Community-acquired pneumonia", "Dehydration"]),
    ("easy", "Right lower quadrant abdominal pain", ["Acute appendicitis", "Mild leukocytosis"]),
    ("easy", "Dysuria and urinary frequency", ["Complicated urinary tract infection", "Type 2 diabetes mellitus"]),
    ("medium", "Substernal chest pressure at rest", ["Non-ST elevation myocardial infarction", "Hyperlipidemia"]),
    ("medium", "Progressive dyspnea and leg swelling", ["Acute decompensated heart failure", "Chronic kidney disease stage 3"]),
    ("medium", "Black tarry stools and lightheadedness", ["Upper gastrointestinal bleed", "Acute blood loss anemia"]),
    ("medium", "Severe epigastric pain radiating to back", ["Acute pancreatitis", "Alcohol use disorder"]),
    ("medium", "Sudden pleuritic chest pain", ["Acute pulmonary embolism", "Deep vein thrombosis"]),
    ("medium", "Polyuria, polydipsia and confusion", ["Diabetic ketoacidosis", "Hyponatremia"]),
    ("hard", "Fever, confusion and bruising", ["Thrombotic thrombocytopenic purpura", "Acute kidney injury"]),
    ("hard", "Fatigue, weight loss and hypotension", ["Primary adrenal insufficiency", "Hyperkalemia"]),
    ("hard", "Night sweats and miliary infiltrates", ["Disseminated miliary tuberculosis", "Hypercalcemia"]),
    ("hard", "Sinusitis, hemoptysis and hematuria", ["Granulomatosis with polyangiitis", "Rapidly progressive glomerulonephritis"]),
]


def section_bodies(index: int, complaint: str, diagnoses: list[str],
                   supporting: str | None = None) -> dict:
    # "supporting" keeps diagnosis wording out of the results section when the
    # case carries a redaction sentinel
    main = (supporting or diagnoses[0]).lower()
    return {
        SectionName.CHIEF_COMPLAINT: complaint,
        SectionName.HISTORY_OF_PRESENT_ILLNESS: (
            f"Patient {index} presented with {complaint.lower()} worsening over "
            "three days. No recent travel. Symptoms did not improve with rest."
        ),
        SectionName.SOCIAL_HISTORY: "Lives at home. Former smoker, quit ten years ago. No alcohol.",
        SectionName.PHYSICAL_EXAM: (
            "T 100.8F, HR 104, BP 118/72, RR 20, SpO2 94% on room air. "
            "Findings consistent with the presenting complaint."
        ),
        SectionName.PERTINENT_RESULTS: (
            f"Laboratory studies notable for abnormalities supporting {main}. "
            "Imaging reviewed by radiology."
        ),
        SectionName.MAJOR_SURGICAL_OR_INVASIVE_PROCEDURE: "None during this admission.",
        SectionName.BRIEF_HOSPITAL_COURSE: (
            f"Admitted for workup of {complaint.lower()}. Treated with standard "
            "therapy and monitored with daily labs until clinically stable."
        ),
        SectionName.MEDICATIONS_ON_ADMISSION: "Lisinopril 10 mg daily. Atorvastatin 40 mg nightly.",
        SectionName.DISCHARGE_MEDICATIONS: "Continue home medications. New prescriptions as discussed.",
        SectionName.DISCHARGE_DIAGNOSIS: "\n".join(diagnoses),
        SectionName.DISCHARGE_CONDITION: "Stable, ambulating, tolerating oral intake.",
        SectionName.DISCHARGE_INSTRUCTIONS: "Follow up with primary care within one week. Return for worsening symptoms.",
    }


def build_case(index: int, difficulty: str, complaint: str, diagnoses: list[str],
               supporting: str | None = None) -> ClinicalCase:
    sections = section_bodies(index, complaint, diagnoses, supporting)
    note = SectionedNote(
        sections=sections,
        raw_length=sum(len(b) for b in sections.values()),
    )
    return ClinicalCase(
        case_id=f"case-{index:03d}",
        note=note,
        reference_diagnoses=tuple(diagnoses),
        difficulty=Difficulty(difficulty),
    )


def build_corpus_cases() -> list[ClinicalCase]:
    return [
        build_case(i, difficulty, complaint, diagnoses)
        for i, (difficulty, complaint, diagnoses) in enumerate(CASE_SPECS, start=1)
    ]


def random_case(rng: random.Random, index: int) -> ClinicalCase:
    """Case with a unique sentinel token inside the diagnosis section only."""
    sentinel = f"sentineldx{index}q{rng.randrange(10**6)}"
    difficulty = rng.choice(["easy", "medium", "hard"])
    complaint = rng.choice([spec[1] for spec in CASE_SPECS])
    diagnoses = [f"Occult condition {sentinel}", "Secondary finding"]
    case = build_case(index, difficulty, complaint, diagnoses,
                      supporting="the admitting impression")
    assert sentinel in case.note.sections[SectionName.DISCHARGE_DIAGNOSIS]
    for name in CANONICAL_ORDER:
        if name is not SectionName.DISCHARGE_DIAGNOSIS:
            assert sentinel not in case.note.sections[name]
    return case


@pytest.fixture
def corpus_cases():
    return build_corpus_cases()


@pytest.fixture
def corpus_path(tmp_path, corpus_cases):
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus_cases, path)
    return path


def chief_script(interactive_questions: int = 2) -> dict:
    """Simulation script whose tool calls echo the reference diagnoses."""
    baseline_call = json.dumps({
        "request": "baseline_discharge_text_tool",
        "dischargeText": {"diagnosis": "{refs}"},
    })
    interactive_call = json.dumps({
        "request": "discharge_text_tool",
        "dischargeText": {"diagnosis": "{refs}"},
    })
    questions = [
        "Please give an initial evaluation with key symptoms and likely diagnoses.",
        "Any pertinent lab results or imaging findings?",
        "Is the presentation acute or chronic?",
    ][:interactive_questions]
    return {
        "assistant_reply": "The note documents findings consistent with the working diagnosis.",
        "default": {
            "baseline": [baseline_call],
            "interactive": questions + [interactive_call],
        },
    }


def write_script(tmp_path: Path, name: str = "script.json", **kwargs) -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(chief_script(**kwargs)), encoding="utf-8")
    return path
