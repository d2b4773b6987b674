"""HTTP service exposing study runs, encounters, surveys, ratings and reports.

Every state change is appended to the event store before the response is
sent, so a restarted process replays the log and resumes where it left off.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from dxbench import dialogue
from dxbench.config import RunConfig
from dxbench.corpus import (
    ClinicalCase,
    Condition,
    SessionPlan,
    load_corpus,
    load_plan,
    physician_view,
)
from dxbench.dialogue import (
    AssistantReply,
    BaselineQueryError,
    EmptyAnswerError,
    EncounterClosedError,
    EncounterStatus,
    Exit,
    Expertise,
    FinalAnswer,
    UpstreamError,
    finalize_encounter,
    is_final_answer,
    new_encounter,
    parse_final_diagnoses,
    physician_instructions,
    render_assistant_prompt,
)
from dxbench.events import EventStore
from dxbench.llm import HttpChatClient


class SelfRatingError(Exception):
    """Raters may not score their own encounters."""


class UnknownEncounterError(Exception):
    pass


class CreateRunBody(BaseModel):
    plan_id: str
    participant_id: str
    expertise: str


class MessageBody(BaseModel):
    text: str


class FinalBody(BaseModel):
    text: str


class SurveyBody(BaseModel):
    likert: dict[str, int]
    free_text: dict[str, str] = Field(default_factory=dict)


class RatingBody(BaseModel):
    encounter_id: str
    rater_id: str
    ordinal: float


@dataclass
class RunState:
    run_id: str
    plan: SessionPlan
    participant_id: str
    expertise: Expertise
    # case index -> encounter id, filled lazily as the physician advances
    encounters: dict[int, str] = field(default_factory=dict)
    aborted: bool = False

    def current_index(self, finalized: set[str]) -> int:
        i = 0
        while i < len(self.plan.case_ids):
            eid = self.encounters.get(i)
            if eid is None or eid not in finalized:
                return i
            i += 1
        return i


def _survey_definition() -> dict[str, Any]:
    text = dialogue.load_template("survey.json")
    return json.loads(text)


class StudyService:
    """Owns in-memory state; the FastAPI layer is a thin adapter over it."""

    def __init__(self, config: RunConfig, assistant_client=None, clock=None):
        self.config = config
        self.clock = clock or time.time
        self.cases: dict[str, ClinicalCase] = {
            c.case_id: c for c in load_corpus(config.corpus_path)
        }
        self.plans: dict[str, SessionPlan] = {}
        for p in config.plan_paths:
            plan = load_plan(p)
            self.plans[plan.session_id] = plan
        self.store = EventStore(config.event_store_path)
        if assistant_client is not None:
            self.assistant = assistant_client
        elif config.assistant is not None:
            self.assistant = HttpChatClient(config.assistant)
        else:
            self.assistant = None
        self.survey = _survey_definition()
        self.lock = threading.Lock()
        self.runs: dict[str, RunState] = {}
        self.encounters: dict[str, dialogue.EncounterState] = {}
        self.encounter_run: dict[str, str] = {}
        self.finalized: dict[str, dialogue.EncounterLog] = {}
        self._resume()

    # -- persistence ------------------------------------------------------

    def _resume(self) -> None:
        replay = self.store.replay()
        for rec in replay.runs:
            plan = self.plans.get(rec["plan_id"])
            if plan is None:
                continue
            self.runs[rec["run_id"]] = RunState(
                run_id=rec["run_id"],
                plan=plan,
                participant_id=rec["participant_id"],
                expertise=Expertise(rec["expertise"]),
            )
        for eid, meta in replay.created_meta.items():
            run = self.runs.get(meta.get("run_id", ""))
            if run is None:
                continue
            run.encounters[int(meta["case_index"])] = eid
            self.encounter_run[eid] = run.run_id
        self.encounters = dict(replay.open_states)
        self.finalized = {log.encounter_id: log for log in replay.finalized}
        for log in replay.aborted:
            run_id = self.encounter_run.get(log.encounter_id)
            if run_id:
                self.runs[run_id].aborted = True

    # -- runs --------------------------------------------------------------

    def create_run(self, plan_id: str, participant_id: str, expertise: str) -> dict:
        plan = self.plans.get(plan_id)
        if plan is None:
            raise KeyError(plan_id)
        run_id = f"{plan_id}:{participant_id}"
        with self.lock:
            run = self.runs.get(run_id)
            if run is None:
                run = RunState(
                    run_id=run_id,
                    plan=plan,
                    participant_id=participant_id,
                    expertise=Expertise(expertise),
                )
                self.runs[run_id] = run
                self.store.append(run_id, {
                    "event": "run_created",
                    "run_id": run_id,
                    "plan_id": plan_id,
                    "participant_id": participant_id,
                    "expertise": expertise,
                    "timestamp": self.clock(),
                })
        return self._progress(run)

    def _progress(self, run: RunState) -> dict:
        idx = run.current_index(set(self.finalized))
        return {
            "run_id": run.run_id,
            "session_id": run.plan.session_id,
            "condition": run.plan.condition.value,
            "completed": idx,
            "total": len(run.plan.case_ids),
            "aborted": run.aborted,
        }

    def next_case(self, run_id: str) -> dict:
        run = self.runs.get(run_id)
        if run is None:
            raise KeyError(run_id)
        with self.lock:
            progress = self._progress(run)
            if run.aborted or progress["completed"] >= progress["total"]:
                return {"done": True, "progress": progress}
            idx = progress["completed"]
            eid = run.encounters.get(idx)
            if eid is None or (eid not in self.encounters and eid not in self.finalized):
                eid = f"{run_id}:{idx}:{uuid.uuid4().hex[:8]}"
                case = self.cases[run.plan.case_ids[idx]]
                state = new_encounter(
                    case_id=case.case_id,
                    participant_id=run.participant_id,
                    expertise=run.expertise,
                    condition=run.plan.condition,
                    session_id=run.plan.session_id,
                    encounter_id=eid,
                    clock=self.clock,
                )
                run.encounters[idx] = eid
                self.encounters[eid] = state
                self.encounter_run[eid] = run_id
                self.store.append(eid, {
                    "event": "created",
                    "participant_id": run.participant_id,
                    "expertise": run.expertise.value,
                    "case_id": case.case_id,
                    "condition": run.plan.condition.value,
                    "session_id": run.plan.session_id,
                    "timestamp": state.started_at,
                    "run_id": run_id,
                    "case_index": idx,
                })
            state = self.encounters[eid]
            case = self.cases[state.case_id]
            return {
                "done": False,
                "encounter_id": eid,
                "case_id": case.case_id,
                "condition": state.condition.value,
                "case_text": physician_view(case, state.condition),
                "instructions": physician_instructions(state.condition),
                "turns": [
                    {"role": t.role.value, "text": t.text} for t in state.turns
                ],
                "progress": {**self._progress(run), "current": idx + 1},
            }

    # -- encounters ---------------------------------------------------------

    def _state(self, encounter_id: str) -> dialogue.EncounterState:
        state = self.encounters.get(encounter_id)
        if state is None:
            raise UnknownEncounterError(encounter_id)
        return state

    def post_message(self, encounter_id: str, text: str) -> dict:
        state = self._state(encounter_id)
        case = self.cases[state.case_id]
        system_prompt = None
        client = None
        if state.condition is Condition.INTERACTIVE:
            client = self.assistant
            system_prompt = render_assistant_prompt(case)
        outcome = dialogue.post_physician_message(
            state,
            text,
            client,
            system_prompt=system_prompt,
            clock=self.clock,
            store=self.store,
        )
        if isinstance(outcome, AssistantReply):
            return {"kind": "reply", "text": outcome.turn.text}
        if isinstance(outcome, FinalAnswer):
            self._note_final(outcome.log)
            return {"kind": "final", "diagnoses": list(outcome.log.final_diagnoses)}
        assert isinstance(outcome, Exit)
        self._note_abort(outcome.log)
        return {"kind": "exit"}

    def post_final(self, encounter_id: str, text: str) -> dict:
        """Accepts either the prefixed protocol form or a bare ";"-joined list."""
        state = self._state(encounter_id)
        if state.status is not EncounterStatus.OPEN:
            raise EncounterClosedError(encounter_id)
        if is_final_answer(text):
            diagnoses = parse_final_diagnoses(text)
        else:
            diagnoses = [p.strip() for p in text.split(";") if p.strip()]
            if not diagnoses:
                raise EmptyAnswerError("final submission contains no diagnoses")
        log = finalize_encounter(
            state, diagnoses, raw_text=text, clock=self.clock, store=self.store
        )
        self._note_final(log)
        return {"kind": "final", "diagnoses": list(log.final_diagnoses)}

    def _note_final(self, log: dialogue.EncounterLog) -> None:
        self.finalized[log.encounter_id] = log
        self.encounters.pop(log.encounter_id, None)

    def _note_abort(self, log: dialogue.EncounterLog) -> None:
        self.encounters.pop(log.encounter_id, None)
        run_id = self.encounter_run.get(log.encounter_id)
        if run_id:
            self.runs[run_id].aborted = True

    # -- surveys -------------------------------------------------------------

    def submit_survey(self, run_id: str, likert: dict[str, int], free_text: dict[str, str]) -> dict:
        run = self.runs.get(run_id)
        if run is None:
            raise KeyError(run_id)
        expected = [item["key"] for item in self.survey["likert_items"]]
        missing = [k for k in expected if k not in likert]
        extra = [k for k in likert if k not in expected]
        if missing or extra:
            raise ValueError(f"survey keys mismatch: missing={missing} extra={extra}")
        lo, hi = self.survey["scale"]["min"], self.survey["scale"]["max"]
        bad = {k: v for k, v in likert.items() if not (isinstance(v, int) and lo <= v <= hi)}
        if bad:
            raise ValueError(f"likert answers out of range {lo}..{hi}: {bad}")
        record = {
            "run_id": run_id,
            "session_id": run.plan.session_id,
            "condition": run.plan.condition.value,
            "participant_id": run.participant_id,
            "expertise": run.expertise.value,
            "likert": {k: likert[k] for k in expected},
            "free_text": free_text,
            "timestamp": self.clock(),
        }
        path = Path(self.config.surveys_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with self.lock, open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
        return {"accepted": True, "run_id": run_id}

    # -- blinded manual review -------------------------------------------------

    def rating_queue(self) -> list[dict]:
        """Finalized encounters with references, stripped of arm and identity."""
        rated = {r["encounter_id"] for r in self._read_ratings()}
        queue = []
        for eid, log in sorted(self.finalized.items()):
            if eid in rated:
                continue
            case = self.cases[log.case_id]
            queue.append({
                "encounter_id": eid,
                "case_id": log.case_id,
                "predicted_diagnoses": list(log.final_diagnoses),
                "reference_diagnoses": list(case.reference_diagnoses),
            })
        return queue

    def _read_ratings(self) -> list[dict]:
        path = Path(self.config.ratings_path)
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def submit_rating(self, encounter_id: str, rater_id: str, ordinal: float) -> dict:
        log = self.finalized.get(encounter_id)
        if log is None:
            raise UnknownEncounterError(encounter_id)
        if rater_id == log.participant_id:
            raise SelfRatingError(rater_id)
        if ordinal not in (0.0, 0.5, 1.0):
            raise ValueError(f"ordinal must be one of 0, 0.5, 1, got {ordinal}")
        previous = [r for r in self._read_ratings() if r["encounter_id"] == encounter_id]
        record = {
            "encounter_id": encounter_id,
            "case_id": log.case_id,
            "session_id": log.session_id,
            "participant_id": log.participant_id,
            "rater_id": rater_id,
            "ordinal": ordinal,
            "replaces": previous[-1]["ordinal"] if previous else None,
            "timestamp": self.clock(),
        }
        path = Path(self.config.ratings_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with self.lock, open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
        return {"accepted": True, "encounter_id": encounter_id}

    # -- reports ----------------------------------------------------------------

    def report(self, name: str) -> tuple[str, str]:
        if "/" in name or "\\" in name or name.startswith("."):
            raise KeyError(name)
        path = Path(self.config.reports_dir) / name
        if not path.is_file():
            raise KeyError(name)
        media = "application/json" if name.endswith((".json", ".jsonl")) else "text/plain"
        return path.read_text(encoding="utf-8"), media


def create_app(config: RunConfig, assistant_client=None, clock=None) -> FastAPI:
    service = StudyService(config, assistant_client=assistant_client, clock=clock)
    app = FastAPI(title="dxbench", version="0.1.0")
    app.state.service = service

    def auth(x_study_token: str | None = Header(default=None)) -> None:
        if config.api_token and x_study_token != config.api_token:
            raise HTTPException(status_code=401, detail="invalid or missing study token")

    guarded = [Depends(auth)]

    @app.post("/runs", dependencies=guarded)
    def create_run(body: CreateRunBody):
        try:
            return service.create_run(body.plan_id, body.participant_id, body.expertise)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"unknown plan {exc}") from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/runs/{run_id}/next", dependencies=guarded)
    def next_case(run_id: str):
        try:
            return service.next_case(run_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"unknown run {exc}") from exc

    @app.post("/encounters/{encounter_id}/message", dependencies=guarded)
    def post_message(encounter_id: str, body: MessageBody):
        try:
            return service.post_message(encounter_id, body.text)
        except UnknownEncounterError as exc:
            raise HTTPException(status_code=404, detail=f"unknown encounter {exc}") from exc
        except EncounterClosedError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except BaselineQueryError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except EmptyAnswerError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except UpstreamError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc

    @app.post("/encounters/{encounter_id}/final", dependencies=guarded)
    def post_final(encounter_id: str, body: FinalBody):
        try:
            return service.post_final(encounter_id, body.text)
        except UnknownEncounterError as exc:
            raise HTTPException(status_code=404, detail=f"unknown encounter {exc}") from exc
        except EncounterClosedError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except EmptyAnswerError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/runs/{run_id}/survey", dependencies=guarded)
    def get_survey(run_id: str):
        if run_id not in service.runs:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return service.survey

    @app.post("/runs/{run_id}/survey", dependencies=guarded)
    def post_survey(run_id: str, body: SurveyBody):
        try:
            return service.submit_survey(run_id, body.likert, body.free_text)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"unknown run {exc}") from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/ratings/queue", dependencies=guarded)
    def rating_queue():
        return service.rating_queue()

    @app.post("/ratings", dependencies=guarded)
    def post_rating(body: RatingBody):
        try:
            return service.submit_rating(body.encounter_id, body.rater_id, body.ordinal)
        except UnknownEncounterError as exc:
            raise HTTPException(status_code=404, detail=f"unknown encounter {exc}") from exc
        except SelfRatingError as exc:
            raise HTTPException(
                status_code=400, detail=f"rater {exc} may not rate their own encounter"
            ) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/reports/{name}", dependencies=guarded)
    def get_report(name: str):
        from fastapi.responses import Response

        try:
            text, media = service.report(name)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=f"no report named {exc}") from exc
        return Response(content=text, media_type=media)

    return app
