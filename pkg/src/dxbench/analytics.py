"""Dialogue analytics: question-type classification, grounding overlap,
LLM-judge scoring, and interaction-effort summaries."""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from dxbench.dialogue import (
    ChatClient,
    EncounterLog,
    Role,
    is_final_turn,
    load_template,
)
from dxbench.matching import normalize


class QuestionType(str, Enum):
    DETAIL_REQUEST = "detail_request"
    INFO_REQUEST = "info_request"
    SUGGESTION = "suggestion"
    OTHER = "other"


class EmptyAnswerError(ValueError):
    """Answer has no content tokens to ground."""


class JudgeParseError(ValueError):
    """Judge reply carried no usable score in [0, 1]."""


# Fixed stopword list used by context_overlap; versioned so that scores are
# comparable across runs.
STOPWORDS_VERSION = "v1"
STOPWORDS = frozenset(
    """
    a an the and or but if then than of in on at to for with without from by
    as is are was were be been being it its this that these those there their
    they them he she his her you your we our i not no nor do does did done
    has have had having can could may might shall should will would about
    into over under again more most some such only own same so very s t just
    now any each both
    """.split()
)

# suggestion: the clinician asks the assistant to produce diagnoses/opinions
_SUGGESTION_PATTERNS = (
    "differential",
    "suggest",
    "your opinion",
    "what do you think",
    "most likely diagnos",
    "possible diagnos",
    "likely diagnos",
    "what is the diagnos",
    "which diagnos",
    "initial evaluation",
    "initial assessment",
)
# detail_request: the clinician probes a candidate diagnosis they named
_DETAIL_PATTERNS = (
    "could it be",
    "could this be",
    "can it be",
    "is it possible",
    "is this consistent with",
    "consistent with",
    "any evidence of",
    "evidence of",
    "any documentation of",
    "any signs of",
    "signs of",
    "rule out",
    "is it acute or chronic",
    "acute or chronic",
)
# info_request: documented facts (labs, imaging, vitals, history, demographics)
_INFO_PATTERNS = (
    "lab", "level", "value", "result", "report", "finding",
    "vital", "blood pressure", "heart rate", "temperature", "saturation",
    "imaging", "x ray", "xray", "ct", "mri", "ultrasound", "echo",
    "ecg", "ekg", "troponin", "creatinine", "hemoglobin", "wbc", "lactate",
    "history", "medication", "allerg", "exam", "age", "sex", "smok",
    "culture", "urinalysis", "glucose",
)


def _matches_any(haystack: str, patterns: Sequence[str]) -> bool:
    # Patterns anchor at a word start (stems like "diagnos" run on freely).
    return any(f" {p}" in haystack for p in patterns)


def _rule_based_classify(text: str) -> QuestionType:
    lowered = " " + " ".join(normalize(text))
    if _matches_any(lowered, _SUGGESTION_PATTERNS):
        return QuestionType.SUGGESTION
    if _matches_any(lowered, _DETAIL_PATTERNS):
        return QuestionType.DETAIL_REQUEST
    if _matches_any(lowered, _INFO_PATTERNS):
        return QuestionType.INFO_REQUEST
    return QuestionType.OTHER


Classifier = Callable[[str], QuestionType]


def classify_question(text: str, classifier: Classifier | None = None) -> QuestionType:
    """Classify a physician query; the default rule set is a deterministic
    approximation and can be swapped for an LLM-backed callable."""
    return (classifier or _rule_based_classify)(text)


def context_overlap(
    answer: str,
    note: str,
    stopwords: frozenset[str] = STOPWORDS,
) -> float:
    """Fraction of the answer's content tokens (multiset) found in the note."""
    answer_tokens = [t for t in normalize(answer) if t not in stopwords]
    if not answer_tokens:
        raise EmptyAnswerError("answer has no content tokens")
    note_tokens = set(normalize(note))
    present = sum(1 for t in answer_tokens if t in note_tokens)
    return present / len(answer_tokens)


@dataclass(frozen=True)
class JudgeScores:
    faithfulness: float
    relevancy: float
    context_overlap: float
    judge_model_id: str


_NUMBER_RE = re.compile(r"[-+]?\d*\.?\d+")


def _parse_score(reply: str) -> float:
    match = _NUMBER_RE.search(reply)
    if match is None:
        raise JudgeParseError(f"no number in judge reply: {reply!r}")
    value = float(match.group())
    if not 0.0 <= value <= 1.0:
        raise JudgeParseError(f"judge score {value} outside [0, 1]")
    return value


JUDGE_FAITHFULNESS_TEMPLATE = "judge_faithfulness.txt"
JUDGE_RELEVANCY_TEMPLATE = "judge_relevancy.txt"


def _fill(template: str, **fields: str) -> str:
    for key, value in fields.items():
        template = template.replace("{" + key + "}", value)
    return template


def judge_response(
    judge: ChatClient,
    question: str,
    answer: str,
    note: str,
    *,
    judge_model_id: str = "",
    faithfulness_template: str | None = None,
    relevancy_template: str | None = None,
) -> JudgeScores:
    """Score one assistant reply: two judge calls plus deterministic overlap."""
    faithfulness_template = faithfulness_template or load_template(JUDGE_FAITHFULNESS_TEMPLATE)
    relevancy_template = relevancy_template or load_template(JUDGE_RELEVANCY_TEMPLATE)
    faith_prompt = _fill(faithfulness_template, note=note, question=question, answer=answer)
    rel_prompt = _fill(relevancy_template, question=question, answer=answer)
    faithfulness = _parse_score(judge.complete([{"role": "user", "content": faith_prompt}]))
    relevancy = _parse_score(judge.complete([{"role": "user", "content": rel_prompt}]))
    return JudgeScores(
        faithfulness=faithfulness,
        relevancy=relevancy,
        context_overlap=context_overlap(answer, note),
        judge_model_id=judge_model_id,
    )


def physician_queries(log: EncounterLog) -> list:
    """Physician turns that are questions (final-answer turns excluded)."""
    return [
        t for t in log.turns
        if t.role is Role.PHYSICIAN and not is_final_turn(t)
    ]


@dataclass(frozen=True)
class EffortSummary:
    session_id: str
    expertise: str
    n: int
    mean_turns: float
    sd_turns: float
    mean_minutes: float
    sd_minutes: float
    single_encounter: bool  # sd reported as 0 under the n-1 convention


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    variance = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance)


def effort_summary(logs: Iterable[EncounterLog]) -> list[EffortSummary]:
    """Per (session, expertise): mean/sd of query counts and durations."""
    grouped: dict[tuple[str, str], list[EncounterLog]] = defaultdict(list)
    for log in logs:
        grouped[(log.session_id, log.expertise.value)].append(log)
    summaries = []
    for (session_id, expertise), group in sorted(grouped.items()):
        turn_counts = [float(len(physician_queries(log))) for log in group]
        minutes = [log.elapsed_minutes for log in group]
        mean_turns, sd_turns = _mean_sd(turn_counts)
        mean_minutes, sd_minutes = _mean_sd(minutes)
        summaries.append(EffortSummary(
            session_id=session_id,
            expertise=expertise,
            n=len(group),
            mean_turns=mean_turns,
            sd_turns=sd_turns,
            mean_minutes=mean_minutes,
            sd_minutes=sd_minutes,
            single_encounter=len(group) == 1,
        ))
    return summaries


@dataclass(frozen=True)
class QuestionCell:
    session_id: str
    expertise: str
    question_type: QuestionType
    count: int
    percentage: float  # of the cell's session x expertise total, one decimal


def question_distribution(
    logs: Iterable[EncounterLog],
    classifier: Classifier | None = None,
) -> list[QuestionCell]:
    """Counts and one-decimal percentages per (session, expertise, type)."""
    counts: dict[tuple[str, str], dict[QuestionType, int]] = defaultdict(
        lambda: {qt: 0 for qt in QuestionType}
    )
    for log in logs:
        for turn in physician_queries(log):
            qtype = turn.question_type or classify_question(turn.text, classifier)
            counts[(log.session_id, log.expertise.value)][QuestionType(qtype)] += 1
    cells = []
    for (session_id, expertise), per_type in sorted(counts.items()):
        total = sum(per_type.values())
        for qtype in QuestionType:
            count = per_type[qtype]
            pct = round(100.0 * count / total, 1) if total else 0.0
            cells.append(QuestionCell(session_id, expertise, qtype, count, pct))
    return cells
