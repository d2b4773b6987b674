"""Run configuration loaded from YAML."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from dxbench.dialogue import LlmEndpointConfig
from dxbench.matching import MatchConfig
from dxbench.stats import RNG_ALGORITHM, StdWeights


@dataclass(frozen=True)
class RunConfig:
    corpus_path: Path
    plan_paths: tuple[Path, ...]
    event_store_path: Path
    surveys_path: Path
    ratings_path: Path
    reports_dir: Path
    assistant: LlmEndpointConfig | None = None
    judge: LlmEndpointConfig | None = None
    match: MatchConfig = MatchConfig()
    weights: StdWeights = StdWeights()
    bootstrap_replicates: int = 20000
    bootstrap_seed: int = 42
    rng_algorithm: str = RNG_ALGORITHM
    listen_host: str = "127.0.0.1"
    listen_port: int = 8200
    api_token: str | None = None
    prompt_profile: str = "default"

    def __post_init__(self) -> None:
        if self.assistant and self.judge and self.assistant.model_id == self.judge.model_id:
            raise ValueError(
                "assistant and judge must be configured with distinct model ids"
            )
        if self.rng_algorithm != RNG_ALGORITHM:
            raise ValueError(f"unsupported rng algorithm {self.rng_algorithm!r}")

    def require_paths(self) -> None:
        """Startup check: inputs must exist, output dirs must be creatable."""
        missing = [p for p in (self.corpus_path, *self.plan_paths) if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(f"missing configured paths: {missing}")
        for out in (self.event_store_path, self.surveys_path, self.ratings_path):
            Path(out).parent.mkdir(parents=True, exist_ok=True)
        self.reports_dir.mkdir(parents=True, exist_ok=True)


def _endpoint(section: dict | None) -> LlmEndpointConfig | None:
    if not section:
        return None
    return LlmEndpointConfig(
        model_id=section["model_id"],
        base_url=section.get("base_url", ""),
        temperature=section.get("temperature", 0.7),
        api_key_env_var=section.get("api_key_env_var"),
        timeout_seconds=section.get("timeout_seconds", 120.0),
    )


def load_config(path: str | Path) -> RunConfig:
    base = Path(path).parent
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}

    def respath(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    weights_raw = raw.get("weights")
    weights = StdWeights(
        w_easy=weights_raw["easy"],
        w_medium=weights_raw["medium"],
        w_hard=weights_raw["hard"],
    ) if weights_raw else StdWeights()
    match_raw = raw.get("match") or {}
    bootstrap_raw = raw.get("bootstrap") or {}
    listen_raw = raw.get("listen") or {}
    return RunConfig(
        corpus_path=respath(raw["corpus"]),
        plan_paths=tuple(respath(p) for p in raw.get("plans", [])),
        event_store_path=respath(raw.get("event_store", "events.jsonl")),
        surveys_path=respath(raw.get("surveys", "surveys.jsonl")),
        ratings_path=respath(raw.get("ratings", "ratings.jsonl")),
        reports_dir=respath(raw.get("reports_dir", "reports")),
        assistant=_endpoint(raw.get("assistant")),
        judge=_endpoint(raw.get("judge")),
        match=MatchConfig(
            threshold=match_raw.get("threshold", 80.0),
            profile=match_raw.get("profile", "v1"),
        ),
        weights=weights,
        bootstrap_replicates=bootstrap_raw.get("replicates", 20000),
        bootstrap_seed=bootstrap_raw.get("seed", 42),
        rng_algorithm=raw.get("rng", RNG_ALGORITHM),
        listen_host=listen_raw.get("host", "127.0.0.1"),
        listen_port=listen_raw.get("port", 8200),
        api_token=raw.get("api_token"),
        prompt_profile=raw.get("prompt_profile", "default"),
    )
