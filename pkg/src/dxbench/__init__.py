"""Workbench for physician vs physician+assistant diagnostic dialogue studies."""

from dxbench.corpus import (
    CANONICAL_ORDER,
    ClinicalCase,
    Condition,
    Difficulty,
    SectionName,
    SectionedNote,
    assistant_view,
    build_session_plan,
    load_corpus,
    parse_note,
    physician_view,
    serialize_note,
)
from dxbench.dialogue import (
    DialogueTurn,
    EncounterLog,
    EncounterState,
    Expertise,
    Role,
    run_simulated_encounter,
)
from dxbench.events import EventStore
from dxbench.matching import (
    CaseMatchResult,
    MatchConfig,
    indel_ratio,
    match_sets,
    micro_aggregate,
    normalize,
    token_set_ratio,
)
from dxbench.stats import (
    BootstrapResult,
    StdWeights,
    cohen_kappa,
    cronbach_alpha,
    hedges_g,
    mann_whitney_u,
    paired_bootstrap,
    pairwise_concordance,
    standardize,
)

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_ORDER",
    "BootstrapResult",
    "CaseMatchResult",
    "ClinicalCase",
    "Condition",
    "DialogueTurn",
    "Difficulty",
    "EncounterLog",
    "EncounterState",
    "EventStore",
    "Expertise",
    "MatchConfig",
    "Role",
    "SectionName",
    "SectionedNote",
    "StdWeights",
    "assistant_view",
    "build_session_plan",
    "cohen_kappa",
    "cronbach_alpha",
    "hedges_g",
    "indel_ratio",
    "load_corpus",
    "mann_whitney_u",
    "match_sets",
    "micro_aggregate",
    "normalize",
    "paired_bootstrap",
    "pairwise_concordance",
    "parse_note",
    "physician_view",
    "run_simulated_encounter",
    "serialize_note",
    "standardize",
    "token_set_ratio",
    "__version__",
]
