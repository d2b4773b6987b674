"""Append-only event store.

One JSON record per line, one line per turn or lifecycle event. Replaying the
file reconstructs every encounter, which is how the service resumes after a
restart and how offline evaluation reads simulation output.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from dxbench.corpus import Condition
from dxbench.dialogue import (
    DialogueTurn,
    EncounterLog,
    EncounterState,
    EncounterStatus,
    Expertise,
    Role,
)


class StoreError(RuntimeError):
    pass


@dataclass
class ReplayResult:
    open_states: dict[str, EncounterState] = field(default_factory=dict)
    finalized: list[EncounterLog] = field(default_factory=list)
    aborted: list[EncounterLog] = field(default_factory=list)
    created_meta: dict[str, dict] = field(default_factory=dict)
    runs: list[dict] = field(default_factory=list)

    @property
    def logs(self) -> list[EncounterLog]:
        return self.finalized + self.aborted


class EventStore:
    """Line-delimited append-only log keyed by encounter id."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seq: dict[str, int] = {}
        if self.path.exists():
            for record in self:
                key = record.get("encounter_id", "")
                self._seq[key] = max(self._seq.get(key, 0), record.get("seq", 0))
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, encounter_id: str, record: dict) -> dict:
        """Assign the next seq, persist the record, and return it."""
        with self._lock:
            seq = self._seq.get(encounter_id, 0) + 1
            self._seq[encounter_id] = seq
            full = {"encounter_id": encounter_id, "seq": seq, **record}
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(full) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"cannot append to {self.path}: {exc}") from exc
        return full

    def __iter__(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StoreError(f"{self.path}:{line_no}: bad event record: {exc}")

    def replay(self) -> ReplayResult:
        """Rebuild encounter states and logs from the event stream."""
        result = ReplayResult()
        for record in self:
            event = record.get("event")
            encounter_id = record["encounter_id"]
            if event == "run_created":
                result.runs.append(record)
                continue
            if event == "created":
                state = EncounterState(
                    encounter_id=encounter_id,
                    participant_id=record["participant_id"],
                    expertise=Expertise(record["expertise"]),
                    case_id=record["case_id"],
                    condition=Condition(record["condition"]),
                    session_id=record["session_id"],
                    started_at=record["timestamp"],
                )
                result.open_states[encounter_id] = state
                result.created_meta[encounter_id] = record
                continue
            state = result.open_states.get(encounter_id)
            if state is None:
                raise StoreError(f"event for unknown/closed encounter {encounter_id}")
            if event == "turn":
                state.turns.append(DialogueTurn(
                    role=Role(record["role"]),
                    text=record["text"],
                    timestamp=record["timestamp"],
                ))
            elif event == "finalized":
                state.status = EncounterStatus.FINALIZED
                result.finalized.append(EncounterLog(
                    encounter_id=encounter_id,
                    participant_id=state.participant_id,
                    expertise=state.expertise,
                    case_id=state.case_id,
                    condition=state.condition,
                    session_id=state.session_id,
                    started_at=state.started_at,
                    turns=tuple(state.turns),
                    status=EncounterStatus.FINALIZED,
                    final_diagnoses=tuple(record["diagnoses"]),
                    elapsed_minutes=record["elapsed_minutes"],
                ))
                del result.open_states[encounter_id]
            elif event == "aborted":
                state.status = EncounterStatus.ABORTED
                result.aborted.append(EncounterLog(
                    encounter_id=encounter_id,
                    participant_id=state.participant_id,
                    expertise=state.expertise,
                    case_id=state.case_id,
                    condition=state.condition,
                    session_id=state.session_id,
                    started_at=state.started_at,
                    turns=tuple(state.turns),
                    status=EncounterStatus.ABORTED,
                    final_diagnoses=(),
                    elapsed_minutes=(record["timestamp"] - state.started_at) / 60.0,
                ))
                del result.open_states[encounter_id]
            elif event == "error":
                continue
            else:
                raise StoreError(f"unknown event type {event!r}")
        return result


def load_finalized_logs(path: str | Path) -> list[EncounterLog]:
    return EventStore(path).replay().finalized
