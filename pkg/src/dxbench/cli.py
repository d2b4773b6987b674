"""Command line workflow: ingest, plan, simulate, serve, evaluate, judge, report."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import click

from dxbench.analytics import classify_question, judge_response
from dxbench.config import load_config
from dxbench.corpus import (
    ClinicalCase,
    Condition,
    Difficulty,
    SectionName,
    assistant_view,
    build_session_plan,
    load_corpus,
    load_plan,
    parse_note,
    save_corpus,
    save_plan,
)
from dxbench.dialogue import (
    Expertise,
    NoFinalAnswerError,
    Role,
    SimPrompts,
    TickClock,
    run_simulated_encounter,
)
from dxbench.events import EventStore
from dxbench.llm import HttpChatClient, ScriptedChatClient
from dxbench.matching import MatchConfig, match_sets


@click.group()
def main() -> None:
    """Diagnostic dialogue study workbench."""


def _split_listing(text: str) -> list[str]:
    parts = itertools.chain.from_iterable(
        line.split(";") for line in text.splitlines()
    )
    return [p.strip() for p in parts if p.strip()]


@main.command()
@click.argument("notes_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True),
              help="JSON object mapping case id to difficulty.")
@click.option("--out", "out_path", required=True, type=click.Path())
def ingest(notes_dir: str, labels_path: str, out_path: str) -> None:
    """Build a corpus file from a directory of sectioned note text files."""
    with open(labels_path, encoding="utf-8") as fh:
        labels = json.load(fh)
    cases = []
    for path in sorted(Path(notes_dir).glob("*.txt")):
        case_id = path.stem
        label = labels.get(case_id)
        if label is None:
            raise click.ClickException(f"no difficulty label for case {case_id}")
        if isinstance(label, dict):
            label = label["difficulty"]
        note = parse_note(path.read_text(encoding="utf-8"))
        refs = _split_listing(note.sections[SectionName.DISCHARGE_DIAGNOSIS])
        if not refs:
            raise click.ClickException(f"case {case_id} has no discharge diagnoses")
        cases.append(ClinicalCase(
            case_id=case_id,
            note=note,
            reference_diagnoses=tuple(refs),
            difficulty=Difficulty(label),
        ))
    save_corpus(cases, out_path)
    click.echo(f"wrote {len(cases)} cases to {out_path}")


def _parse_composition(text: str | None) -> dict[Difficulty, int] | None:
    if not text:
        return None
    counts = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        counts[Difficulty(key.strip())] = int(value)
    return counts


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--condition", required=True, type=click.Choice(["baseline", "interactive"]))
@click.option("--session-id", default="S1", show_default=True)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--composition", default=None, help="e.g. easy=3,medium=6,hard=4")
@click.option("--out", "out_path", required=True, type=click.Path())
def plan(corpus_path: str, condition: str, session_id: str, seed: int,
         composition: str | None, out_path: str) -> None:
    """Draw a stratified 13-case session plan from the corpus."""
    cases = load_corpus(corpus_path)
    session = build_session_plan(
        cases,
        Condition(condition),
        composition=_parse_composition(composition),
        seed=seed,
        session_id=session_id,
    )
    save_plan(session, out_path)
    click.echo(f"wrote plan {session.session_id} ({condition}) to {out_path}")


class _CyclingClient:
    """Chat client that cycles through a fixed list of replies."""

    def __init__(self, replies):
        if not replies:
            raise ValueError("need at least one scripted reply")
        self.replies = list(replies)
        self.cursor = 0

    def complete(self, messages):
        reply = self.replies[self.cursor % len(self.replies)]
        self.cursor += 1
        return reply


def _expand(text: str, case: ClinicalCase) -> str:
    text = text.replace("{refs}", "; ".join(case.reference_diagnoses))
    return text.replace("{refs_json}", json.dumps(list(case.reference_diagnoses)))


def _chief_replies(script: dict, case: ClinicalCase, scenario: Condition) -> list[str]:
    per_case = (script.get("cases") or {}).get(case.case_id) or script.get("default") or {}
    replies = per_case.get(scenario.value)
    if not replies:
        raise click.ClickException(
            f"script has no {scenario.value} replies for case {case.case_id}"
        )
    return [_expand(r, case) for r in replies]


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", required=True, type=click.Path())
@click.option("--script", "script_path", required=True, type=click.Path(exists=True),
              help="JSON script with chief replies per case and assistant replies.")
@click.option("--participant-id", default="sim-1", show_default=True)
@click.option("--expertise", default="senior", type=click.Choice(["senior", "resident"]),
              show_default=True)
@click.option("--profile", default="default", type=click.Choice(["default", "legacy"]),
              show_default=True)
@click.option("--max-turns", default=20, show_default=True, type=int)
def simulate(corpus_path: str, plan_path: str, events_path: str, script_path: str,
             participant_id: str, expertise: str, profile: str, max_turns: int) -> None:
    """Run scripted model-vs-model encounters over a session plan."""
    cases = {c.case_id: c for c in load_corpus(corpus_path)}
    session = load_plan(plan_path)
    with open(script_path, encoding="utf-8") as fh:
        script = json.load(fh)
    store = EventStore(events_path)
    clock = TickClock()
    prompts = SimPrompts.load(profile)
    assistant_replies = script.get("assistant_replies") or [
        script.get("assistant_reply", "Not reported in note.")
    ]
    done = 0
    for idx, case_id in enumerate(session.case_ids):
        case = cases[case_id]
        chief = ScriptedChatClient(_chief_replies(script, case, session.condition))
        assistant = _CyclingClient([_expand(r, case) for r in assistant_replies])
        encounter_id = f"{participant_id}:{session.session_id}:{idx}"
        try:
            run_simulated_encounter(
                chief, assistant, case, session.condition,
                max_turns=max_turns,
                prompts=prompts,
                participant_id=participant_id,
                expertise=Expertise(expertise),
                session_id=session.session_id,
                encounter_id=encounter_id,
                clock=clock,
                store=store,
            )
            done += 1
        except NoFinalAnswerError as exc:
            click.echo(f"encounter {encounter_id} ended without a diagnosis: {exc}", err=True)
    click.echo(f"finalized {done}/{len(session.case_ids)} encounters into {events_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path: str) -> None:
    """Run the study HTTP service."""
    import uvicorn

    from dxbench.service import create_app

    config = load_config(config_path)
    config.require_paths()
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=80.0, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def evaluate(events_path: str, corpus_path: str, threshold: float, out_path: str) -> None:
    """Score every finalized encounter against its reference diagnoses."""
    cases = {c.case_id: c for c in load_corpus(corpus_path)}
    cfg = MatchConfig(threshold=threshold)
    replay = EventStore(events_path).replay()
    records = []
    for log in replay.finalized:
        case = cases[log.case_id]
        result = match_sets(
            list(log.final_diagnoses), list(case.reference_diagnoses), cfg
        )
        records.append({
            "encounter_id": log.encounter_id,
            "case_id": log.case_id,
            "participant_id": log.participant_id,
            "expertise": log.expertise.value,
            "session_id": log.session_id,
            "condition": log.condition.value,
            "difficulty": case.difficulty.value,
            "elapsed_minutes": log.elapsed_minutes,
            "predicted": list(log.final_diagnoses),
            "reference": list(case.reference_diagnoses),
            "pairs": [[p.pred_index, p.ref_index, p.similarity] for p in result.pairs],
            "precision": result.precision,
            "recall": result.recall,
            "f1": result.f1,
            "any_match": result.any_match,
            "exact_match": result.exact_match,
            "top1": result.top1,
            "n_pred": result.n_pred,
            "n_ref": result.n_ref,
        })
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    skipped = len(replay.aborted)
    click.echo(f"scored {len(records)} encounters ({skipped} aborted skipped) -> {out_path}")


def _judge_client(script_path: str | None, base_url: str | None, model_id: str,
                  api_key_env_var: str | None):
    if script_path:
        with open(script_path, encoding="utf-8") as fh:
            script = json.load(fh)
        if "constant" in script:
            return _CyclingClient([script["constant"]])
        return _CyclingClient(script["replies"])
    if not base_url:
        raise click.ClickException("provide --script or --base-url for the judge")
    from dxbench.dialogue import LlmEndpointConfig

    return HttpChatClient(LlmEndpointConfig(
        model_id=model_id, base_url=base_url,
        temperature=0.0, api_key_env_var=api_key_env_var,
    ))


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--script", "script_path", default=None, type=click.Path(exists=True),
              help="Scripted judge replies instead of a live endpoint.")
@click.option("--base-url", default=None)
@click.option("--model-id", default="judge")
@click.option("--api-key-env-var", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def judge(events_path: str, corpus_path: str, script_path: str | None,
          base_url: str | None, model_id: str, api_key_env_var: str | None,
          out_path: str) -> None:
    """Score assistant answers for faithfulness, relevancy and grounding."""
    cases = {c.case_id: c for c in load_corpus(corpus_path)}
    client = _judge_client(script_path, base_url, model_id, api_key_env_var)
    replay = EventStore(events_path).replay()
    records = []
    for log in replay.finalized:
        if log.condition is not Condition.INTERACTIVE:
            continue
        note = assistant_view(cases[log.case_id])
        for index, turn in enumerate(log.turns):
            if turn.role is not Role.ASSISTANT:
                continue
            question = next(
                (t.text for t in reversed(log.turns[:index]) if t.role is Role.PHYSICIAN),
                "",
            )
            scores = judge_response(
                client, question, turn.text, note, judge_model_id=model_id
            )
            records.append({
                "encounter_id": log.encounter_id,
                "case_id": log.case_id,
                "session_id": log.session_id,
                "expertise": log.expertise.value,
                "turn_index": index,
                "question_type": classify_question(question).value if question else "other",
                "faithfulness": scores.faithfulness,
                "relevancy": scores.relevancy,
                "context_overlap": scores.context_overlap,
                "judge_model_id": scores.judge_model_id,
            })
    with open(out_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    click.echo(f"judged {len(records)} assistant turns -> {out_path}")


def _read_jsonl(path: str | None) -> list[dict]:
    if not path or not Path(path).exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--events", "events_path", default=None, type=click.Path())
@click.option("--ratings", "ratings_path", default=None, type=click.Path())
@click.option("--judge", "judge_path", default=None, type=click.Path())
@click.option("--surveys", "surveys_path", default=None, type=click.Path())
@click.option("--threshold", default=80.0, show_default=True, type=float)
@click.option("--replicates", default=20000, show_default=True, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(results_path: str, events_path: str | None, ratings_path: str | None,
           judge_path: str | None, surveys_path: str | None, threshold: float,
           replicates: int, seed: int, out_dir: str) -> None:
    """Render every report table whose inputs are available."""
    from dxbench.report import build_reports

    logs = []
    if events_path and Path(events_path).exists():
        logs = EventStore(events_path).replay().finalized
    written = build_reports(
        out_dir,
        _read_jsonl(results_path),
        logs=logs,
        rating_records=_read_jsonl(ratings_path),
        judge_records=_read_jsonl(judge_path),
        survey_records=_read_jsonl(surveys_path),
        match_config=MatchConfig(threshold=threshold),
        replicates=replicates,
        seed=seed,
    )
    for name, files in sorted(written.items()):
        click.echo(f"{name}: {', '.join(files)}")


if __name__ == "__main__":
    main()
