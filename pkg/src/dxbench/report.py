"""Report tables built from evaluation results, ratings, logs and surveys.

Each table is produced as a list of plain dicts so it can be serialized as
JSONL, and rendered as a fixed-width text block for reading in a terminal.
Comparison tables pair participants across conditions: a participant's score
for a condition is the mean over their sessions of the difficulty-standardized
per-session score.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from dxbench.analytics import effort_summary, question_distribution
from dxbench.corpus import Difficulty
from dxbench.matching import MatchConfig
from dxbench.stats import (
    ConfusionMatrix2x2,
    DegenerateInputError,
    InsufficientParticipantsError,
    ManualRating,
    StdWeights,
    ZeroVarianceError,
    binary_agreement,
    cohen_kappa,
    cronbach_alpha,
    mann_whitney_u,
    ordinal_summary,
    paired_bootstrap,
    pairwise_concordance,
    standardize,
    three_class_agreement,
)

AUTO_METRICS = ("any_match", "exact_match", "f1", "time_minutes")
MANUAL_METRICS = ("manual_mean", "manual_binary", "manual_complete")
IQR_LABEL = "IQR"  # brackets in the text tables are interquartile ranges


@dataclass(frozen=True)
class ScorePoint:
    """One per-case observation feeding a standardized comparison."""

    participant_id: str
    expertise: str
    session_id: str
    condition: str
    difficulty: Difficulty
    value: float


def _metric_value(record: Mapping[str, Any], metric: str) -> float:
    if metric == "time_minutes":
        return float(record["elapsed_minutes"])
    value = record[metric]
    return float(value) if not isinstance(value, bool) else 1.0 * value


def result_points(results: Iterable[Mapping[str, Any]], metric: str) -> list[ScorePoint]:
    return [
        ScorePoint(
            participant_id=r["participant_id"],
            expertise=r["expertise"],
            session_id=r["session_id"],
            condition=r["condition"],
            difficulty=Difficulty(r["difficulty"]),
            value=_metric_value(r, metric),
        )
        for r in results
    ]


def participant_condition_scores(
    points: Sequence[ScorePoint],
    weights: StdWeights,
) -> tuple[dict[tuple[str, str], float], dict[str, str]]:
    """(participant, condition) -> score, plus participant -> expertise."""
    sessions: dict[tuple[str, str, str], list[ScorePoint]] = defaultdict(list)
    expertise: dict[str, str] = {}
    for p in points:
        sessions[(p.participant_id, p.condition, p.session_id)].append(p)
        expertise[p.participant_id] = p.expertise
    per_condition: dict[tuple[str, str], list[float]] = defaultdict(list)
    for (participant, condition, _session), group in sorted(sessions.items()):
        score = standardize(
            [g.value for g in group], [g.difficulty for g in group], weights
        )
        per_condition[(participant, condition)].append(score)
    scores = {key: sum(vals) / len(vals) for key, vals in per_condition.items()}
    return scores, expertise


def _iqr(values: Sequence[float]) -> tuple[float, float]:
    q1, q3 = np.percentile(np.asarray(values, dtype=np.float64), [25.0, 75.0])
    return float(q1), float(q3)


def comparison_rows(
    points: Sequence[ScorePoint],
    metric: str,
    weights: StdWeights,
    replicates: int = 20000,
    seed: int = 42,
) -> list[dict[str, Any]]:
    """Baseline vs interactive rows for all participants and per expertise.

    Groups with fewer than 2 participants paired across both conditions are
    omitted rather than reported with degenerate statistics.
    """
    scores, expertise = participant_condition_scores(points, weights)
    paired = sorted(
        p for p in expertise
        if (p, "baseline") in scores and (p, "interactive") in scores
    )
    groups: dict[str, list[str]] = {"all": paired}
    for participant in paired:
        groups.setdefault(expertise[participant], []).append(participant)
    rows = []
    for group_name, members in groups.items():
        if len(members) < 2:
            continue
        base = [scores[(m, "baseline")] for m in members]
        inter = [scores[(m, "interactive")] for m in members]
        boot = paired_bootstrap(base, inter, n_replicates=replicates, seed=seed)
        b_iqr = _iqr(base)
        i_iqr = _iqr(inter)
        rows.append({
            "metric": metric,
            "group": group_name,
            "n": len(members),
            "baseline_median": float(np.median(base)),
            "baseline_iqr_low": b_iqr[0],
            "baseline_iqr_high": b_iqr[1],
            "interactive_median": float(np.median(inter)),
            "interactive_iqr_low": i_iqr[0],
            "interactive_iqr_high": i_iqr[1],
            "mean_delta": boot.mean_delta,
            "ci_low": boot.ci_low,
            "ci_high": boot.ci_high,
            "p_two_sided": boot.p_two_sided,
            "hedges_g": boot.hedges_g,
            "replicates": boot.replicates,
            "seed": boot.seed,
        })
    return rows


def auto_comparison_table(
    results: Sequence[Mapping[str, Any]],
    weights: StdWeights,
    metrics: Sequence[str] = AUTO_METRICS,
    replicates: int = 20000,
    seed: int = 42,
) -> list[dict[str, Any]]:
    rows = []
    for metric in metrics:
        rows.extend(comparison_rows(result_points(results, metric), metric, weights, replicates, seed))
    return rows


# -- manual review ------------------------------------------------------------


def latest_ratings(rating_records: Iterable[Mapping[str, Any]]) -> dict[str, dict]:
    """Last submitted rating wins per encounter; earlier ones are audit trail."""
    latest: dict[str, dict] = {}
    for rec in rating_records:
        latest[rec["encounter_id"]] = dict(rec)
    return latest


def session_rating_table(rating_records: Iterable[Mapping[str, Any]]) -> list[dict[str, Any]]:
    ratings = [
        ManualRating(
            participant_id=rec["participant_id"],
            case_id=rec["case_id"],
            session_id=rec["session_id"],
            ordinal=float(rec["ordinal"]),
        )
        for rec in latest_ratings(rating_records).values()
    ]
    if not ratings:
        return []
    grouped = ordinal_summary(ratings, group_by=lambda r: r.session_id)
    return [
        {
            "session_id": session_id,
            "n": st.n,
            "mean_ordinal": st.mean,
            "binary_rate": st.binary_rate,
            "complete_rate": st.complete_rate,
        }
        for session_id, st in sorted(grouped.items())
    ]


_MANUAL_VALUE = {
    "manual_mean": lambda o: o,
    "manual_binary": lambda o: 1.0 if o >= 0.5 else 0.0,
    "manual_complete": lambda o: 1.0 if o == 1.0 else 0.0,
}


def manual_comparison_table(
    rating_records: Iterable[Mapping[str, Any]],
    results: Sequence[Mapping[str, Any]],
    weights: StdWeights,
    replicates: int = 20000,
    seed: int = 42,
) -> list[dict[str, Any]]:
    """Standardized ordinal metrics compared across conditions.

    Condition, expertise and difficulty come from the evaluation results so
    the rating records themselves stay blind to the study arm.
    """
    by_encounter = {r["encounter_id"]: r for r in results}
    rows = []
    for metric, to_value in _MANUAL_VALUE.items():
        points = []
        for rec in latest_ratings(rating_records).values():
            res = by_encounter.get(rec["encounter_id"])
            if res is None:
                continue
            points.append(ScorePoint(
                participant_id=res["participant_id"],
                expertise=res["expertise"],
                session_id=res["session_id"],
                condition=res["condition"],
                difficulty=Difficulty(res["difficulty"]),
                value=to_value(float(rec["ordinal"])),
            ))
        rows.extend(comparison_rows(points, metric, weights, replicates, seed))
    return rows


def agreement_table(
    results: Sequence[Mapping[str, Any]],
    rating_records: Iterable[Mapping[str, Any]],
) -> list[dict[str, Any]]:
    """Automated matcher vs manual review on the encounters both scored."""
    by_encounter = {r["encounter_id"]: r for r in results}
    joined = []
    for rec in latest_ratings(rating_records).values():
        res = by_encounter.get(rec["encounter_id"])
        if res is not None:
            joined.append((res, float(rec["ordinal"])))
    if not joined:
        return []
    tp = sum(1 for res, o in joined if res["any_match"] and o >= 0.5)
    tn = sum(1 for res, o in joined if not res["any_match"] and o < 0.5)
    fp = sum(1 for res, o in joined if res["any_match"] and o < 0.5)
    fn = sum(1 for res, o in joined if not res["any_match"] and o >= 0.5)
    cm = ConfusionMatrix2x2(tp=tp, tn=tn, fp=fp, fn=fn)
    try:
        kappa = cohen_kappa(cm)
    except Exception:
        kappa = float("nan")

    def auto_class(res: Mapping[str, Any]) -> str:
        if res["exact_match"]:
            return "complete"
        return "partial" if res["any_match"] else "wrong"

    manual_class = {1.0: "complete", 0.5: "partial", 0.0: "wrong"}
    three = three_class_agreement(
        [auto_class(res) for res, _ in joined],
        [manual_class[o] for _, o in joined],
    )
    return [
        {
            "comparison": "binary",
            "n": cm.total,
            "agreement": binary_agreement(cm),
            "kappa": kappa,
            "tp": tp, "tn": tn, "fp": fp, "fn": fn,
        },
        {
            "comparison": "three_class",
            "n": len(joined),
            "agreement": three,
            "kappa": None,
            "tp": None, "tn": None, "fp": None, "fn": None,
        },
    ]


# -- concordance ----------------------------------------------------------------


@dataclass(frozen=True)
class _PseudoLog:
    participant_id: str
    expertise: str
    case_id: str
    session_id: str
    condition: str
    final_diagnoses: tuple[str, ...]


def concordance_scores(
    results: Sequence[Mapping[str, Any]],
    cfg: MatchConfig,
    weights: StdWeights,
) -> list[dict[str, Any]]:
    """Standardized pairwise agreement per participant, split within/cross."""
    difficulties = {r["case_id"]: Difficulty(r["difficulty"]) for r in results}
    by_group: dict[tuple[str, str], list[_PseudoLog]] = defaultdict(list)
    for r in results:
        by_group[(r["session_id"], r["condition"])].append(_PseudoLog(
            participant_id=r["participant_id"],
            expertise=r["expertise"],
            case_id=r["case_id"],
            session_id=r["session_id"],
            condition=r["condition"],
            final_diagnoses=tuple(r["predicted"]),
        ))
    rows = []
    for (_session, _condition), logs in sorted(by_group.items()):
        try:
            scores = pairwise_concordance(logs, difficulties, cfg, weights)
        except InsufficientParticipantsError:
            continue
        rows.extend({
            "participant_id": s.participant_id,
            "expertise": s.expertise,
            "session_id": s.session_id,
            "condition": s.condition,
            "pair_type": s.pair_type,
            "value": s.value,
            "n_points": s.n_points,
        } for s in scores)
    return rows


def concordance_comparison_table(
    concordance_rows: Sequence[Mapping[str, Any]],
    weights: StdWeights,
    replicates: int = 20000,
    seed: int = 42,
) -> list[dict[str, Any]]:
    """Baseline vs interactive concordance per pair type.

    The per-participant values are already standardized, so here we only
    average a participant's sessions and bootstrap the paired difference.
    """
    rows = []
    for pair_type in ("within", "cross"):
        per_condition: dict[tuple[str, str], list[float]] = defaultdict(list)
        expertise: dict[str, str] = {}
        for rec in concordance_rows:
            if rec["pair_type"] != pair_type:
                continue
            per_condition[(rec["participant_id"], rec["condition"])].append(rec["value"])
            expertise[rec["participant_id"]] = rec["expertise"]
        scores = {k: sum(v) / len(v) for k, v in per_condition.items()}
        paired = sorted(
            p for p in expertise
            if (p, "baseline") in scores and (p, "interactive") in scores
        )
        groups: dict[str, list[str]] = {"all": paired}
        for participant in paired:
            groups.setdefault(expertise[participant], []).append(participant)
        for group_name, members in groups.items():
            if len(members) < 2:
                continue
            base = [scores[(m, "baseline")] for m in members]
            inter = [scores[(m, "interactive")] for m in members]
            boot = paired_bootstrap(base, inter, n_replicates=replicates, seed=seed)
            rows.append({
                "metric": f"concordance_{pair_type}",
                "group": group_name,
                "n": len(members),
                "baseline_median": float(np.median(base)),
                "interactive_median": float(np.median(inter)),
                "mean_delta": boot.mean_delta,
                "ci_low": boot.ci_low,
                "ci_high": boot.ci_high,
                "p_two_sided": boot.p_two_sided,
                "hedges_g": boot.hedges_g,
            })
    return rows


# -- effort, questions, judge, surveys ----------------------------------------


def effort_table(logs) -> list[dict[str, Any]]:
    return [
        {
            "session_id": s.session_id,
            "expertise": s.expertise,
            "n": s.n,
            "mean_turns": s.mean_turns,
            "sd_turns": s.sd_turns,
            "mean_minutes": s.mean_minutes,
            "sd_minutes": s.sd_minutes,
            "single_encounter": s.single_encounter,
        }
        for s in effort_summary(logs)
    ]


def question_table(logs, classifier=None) -> list[dict[str, Any]]:
    return [
        {
            "session_id": c.session_id,
            "expertise": c.expertise,
            "question_type": c.question_type.value,
            "count": c.count,
            "percentage": c.percentage,
        }
        for c in question_distribution(logs, classifier)
    ]


JUDGE_METRICS = ("faithfulness", "relevancy", "context_overlap")


def judge_table(judge_records: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Judge score means per (session, expertise) plus expertise-gap tests."""
    grouped: dict[tuple[str, str], list[Mapping[str, Any]]] = defaultdict(list)
    for rec in judge_records:
        grouped[(rec["session_id"], rec["expertise"])].append(rec)
    rows = []
    for (session_id, expertise), recs in sorted(grouped.items()):
        row: dict[str, Any] = {
            "kind": "summary",
            "session_id": session_id,
            "expertise": expertise,
            "n": len(recs),
        }
        for metric in JUDGE_METRICS:
            values = [float(r[metric]) for r in recs]
            mean = sum(values) / len(values)
            sd = (
                math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
                if len(values) > 1 else 0.0
            )
            row[f"{metric}_mean"] = mean
            row[f"{metric}_sd"] = sd
        rows.append(row)
    by_expertise: dict[str, list[Mapping[str, Any]]] = defaultdict(list)
    for rec in judge_records:
        by_expertise[rec["expertise"]].append(rec)
    if len(by_expertise) == 2:
        (_, group_a), (_, group_b) = sorted(by_expertise.items())
        for metric in JUDGE_METRICS:
            a = [float(r[metric]) for r in group_a]
            b = [float(r[metric]) for r in group_b]
            try:
                mwu = mann_whitney_u(a, b)
            except DegenerateInputError:
                continue
            rows.append({
                "kind": "expertise_gap",
                "session_id": "all",
                "expertise": " vs ".join(sorted(by_expertise)),
                "metric": metric,
                "u": mwu.u,
                "p_two_sided": mwu.p_two_sided,
                "method": mwu.method,
            })
    return rows


def survey_table(survey_records: Sequence[Mapping[str, Any]]) -> list[dict[str, Any]]:
    """Per-item means by session, composite score, and internal consistency."""
    if not survey_records:
        return []
    items = sorted({k for rec in survey_records for k in rec["likert"]})
    rows = []
    by_session: dict[str, list[Mapping[str, Any]]] = defaultdict(list)
    for rec in survey_records:
        by_session[rec["session_id"]].append(rec)
    scopes = [("all", list(survey_records))]
    scopes.extend(sorted(by_session.items()))
    for scope, recs in scopes:
        for item in items:
            values = [float(r["likert"][item]) for r in recs if item in r["likert"]]
            if not values:
                continue
            mean = sum(values) / len(values)
            sd = (
                math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
                if len(values) > 1 else 0.0
            )
            rows.append({
                "scope": scope, "item": item,
                "n": len(values), "mean": mean, "sd": sd,
            })
        composites = [
            sum(float(v) for v in r["likert"].values()) / len(r["likert"])
            for r in recs
        ]
        mean = sum(composites) / len(composites)
        sd = (
            math.sqrt(sum((v - mean) ** 2 for v in composites) / (len(composites) - 1))
            if len(composites) > 1 else 0.0
        )
        rows.append({
            "scope": scope, "item": "composite",
            "n": len(composites), "mean": mean, "sd": sd,
        })
        matrix = [
            [float(r["likert"][item]) for item in items]
            for r in recs
            if all(item in r["likert"] for item in items)
        ]
        alpha: float | None
        try:
            alpha = cronbach_alpha(matrix)
        except (DegenerateInputError, ZeroVarianceError):
            alpha = None
        rows.append({
            "scope": scope, "item": "cronbach_alpha",
            "n": len(matrix), "mean": alpha, "sd": None,
        })
    return rows


# -- rendering -----------------------------------------------------------------


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        if math.isnan(value):
            return "n/a"
        return f"{value:.3f}"
    return str(value)


def render_table(rows: Sequence[Mapping[str, Any]], title: str) -> str:
    if not rows:
        return f"{title}\n(no data)\n"
    columns = list(rows[0].keys())
    grid = [[_cell(row.get(col)) for col in columns] for row in rows]
    widths = [
        max(len(columns[i]), max(len(line[i]) for line in grid))
        for i in range(len(columns))
    ]
    header = "  ".join(c.ljust(widths[i]) for i, c in enumerate(columns))
    rule = "-" * len(header)
    body = "\n".join(
        "  ".join(line[i].ljust(widths[i]) for i in range(len(columns)))
        for line in grid
    )
    return f"{title}\n{rule}\n{header}\n{rule}\n{body}\n"


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def write_table(rows: Sequence[Mapping[str, Any]], out_dir: Path, name: str, title: str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / f"{name}.txt"
    jsonl_path = out_dir / f"{name}.jsonl"
    text_path.write_text(render_table(rows, title), encoding="utf-8")
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({k: _jsonable(v) for k, v in row.items()}) + "\n")
    return [text_path, jsonl_path]


def build_reports(
    out_dir: str | Path,
    results: Sequence[Mapping[str, Any]],
    *,
    logs=(),
    rating_records: Sequence[Mapping[str, Any]] = (),
    judge_records: Sequence[Mapping[str, Any]] = (),
    survey_records: Sequence[Mapping[str, Any]] = (),
    match_config: MatchConfig = MatchConfig(),
    weights: StdWeights = StdWeights(),
    replicates: int = 20000,
    seed: int = 42,
) -> dict[str, list[str]]:
    """Write every table whose inputs are present; returns name -> files."""
    out_dir = Path(out_dir)
    written: dict[str, list[str]] = {}

    def emit(name: str, rows: list[dict[str, Any]], title: str) -> None:
        if rows:
            paths = write_table(rows, out_dir, name, title)
            written[name] = [str(p) for p in paths]

    if results:
        emit(
            "comparison",
            auto_comparison_table(results, weights, replicates=replicates, seed=seed),
            "Standardized diagnostic performance, baseline vs interactive"
            f" (medians with [{IQR_LABEL}], paired bootstrap)",
        )
        conc = concordance_scores(results, match_config, weights)
        emit("concordance", conc, "Per-participant standardized pairwise concordance")
        emit(
            "concordance_comparison",
            concordance_comparison_table(conc, weights, replicates=replicates, seed=seed),
            "Concordance, baseline vs interactive",
        )
    if rating_records:
        emit("session_ratings", session_rating_table(rating_records), "Manual review by session")
        if results:
            emit(
                "manual_comparison",
                manual_comparison_table(rating_records, results, weights, replicates, seed),
                "Standardized manual-review metrics, baseline vs interactive",
            )
            emit(
                "agreement",
                agreement_table(results, rating_records),
                "Automated matcher vs manual review",
            )
    logs = list(logs)
    if logs:
        emit("effort", effort_table(logs), "Physician effort per session")
        emit("questions", question_table(logs), "Question types per session")
    if judge_records:
        emit("judge", judge_table(list(judge_records)), "Assistant answer quality")
    if survey_records:
        emit("survey", survey_table(list(survey_records)), "Post-session survey")
    return written
