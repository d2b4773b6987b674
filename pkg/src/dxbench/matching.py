"""Diagnosis-set matching: normalized token-set similarity plus greedy
one-to-one assignment.

The similarity algorithm is fixed normatively (not delegated to a fuzzy-
matching library) so that every implementation of the protocol scores
identically: lowercase, strip punctuation to spaces, tokenize, then take the
maximum indel ratio over the sorted intersection/difference constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from dxbench._kernels import indel_distance


class EmptyReferenceError(ValueError):
    """match_sets called with an empty reference list."""


class EmptyInputError(ValueError):
    """micro_aggregate called with no case results."""


def normalize(text: str) -> list[str]:
    """Lowercase, replace non-alphanumerics with spaces, split, drop empties."""
    cleaned = "".join(c if c.isalnum() else " " for c in text.lower())
    return cleaned.split()


def indel_ratio(a: str, b: str) -> float:
    """Similarity in [0, 100] from minimum insertions + deletions.

    100 * (1 - D / (len(a) + len(b))); two empty strings score 100.
    """
    total = len(a) + len(b)
    if total == 0:
        return 100.0
    return 100.0 * (1.0 - indel_distance(a, b) / total)


def token_set_ratio(a: str, b: str) -> float:
    """Token-set similarity in [0, 100].

    With A, B the token sets of the two strings, compares the sorted
    intersection against intersection+difference strings and returns the best
    indel ratio. Equal token sets (any order, any punctuation) score 100, and
    a subset relation scores 100 through the intersection leg.
    """
    set_a = set(normalize(a))
    set_b = set(normalize(b))
    inter = " ".join(sorted(set_a & set_b))
    sa = (inter + " " + " ".join(sorted(set_a - set_b))).strip()
    sb = (inter + " " + " ".join(sorted(set_b - set_a))).strip()
    return max(indel_ratio(inter, sa), indel_ratio(inter, sb), indel_ratio(sa, sb))


@dataclass(frozen=True)
class MatchConfig:
    """Similarity threshold (0-100) and normalization profile id."""

    threshold: float = 80.0
    profile: str = "v1"

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 100.0:
            raise ValueError(f"threshold must be in [0, 100], got {self.threshold}")


STUDY_CONFIG = MatchConfig(threshold=80.0)
ABLATION_CONFIG = MatchConfig(threshold=62.0)


@dataclass(frozen=True)
class MatchedPair:
    pred_index: int
    ref_index: int
    similarity: float


@dataclass(frozen=True)
class CaseMatchResult:
    pairs: tuple[MatchedPair, ...]
    precision: float
    recall: float
    f1: float
    any_match: bool
    exact_match: bool
    top1: bool
    n_pred: int
    n_ref: int


def match_sets(preds: list[str], refs: list[str], cfg: MatchConfig = STUDY_CONFIG) -> CaseMatchResult:
    """Greedy one-to-one matching of predictions against references.

    Candidate pairs at or above the threshold are taken in order of similarity
    descending; ties are broken by the pair's texts rather than list positions
    so that shuffling the inputs cannot change how many pairs are accepted.
    Precision is 0 when there are no predictions.
    """
    if not refs:
        raise EmptyReferenceError("reference diagnosis list is empty")
    n_pred, n_ref = len(preds), len(refs)

    sims = [[token_set_ratio(p, r) for r in refs] for p in preds]
    candidates = [
        (sims[i][j], i, j)
        for i in range(n_pred)
        for j in range(n_ref)
        if sims[i][j] >= cfg.threshold
    ]
    candidates.sort(key=lambda c: (-c[0], preds[c[1]], refs[c[2]], c[1], c[2]))

    pred_used = [False] * n_pred
    ref_used = [False] * n_ref
    pairs: list[MatchedPair] = []
    for sim, i, j in candidates:
        if not pred_used[i] and not ref_used[j]:
            pred_used[i] = True
            ref_used[j] = True
            pairs.append(MatchedPair(i, j, sim))

    n_matched = len(pairs)
    precision = n_matched / n_pred if n_pred else 0.0
    recall = n_matched / n_ref
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    top1 = n_pred > 0 and (
        pred_used[0] or any(sims[0][j] >= cfg.threshold for j in range(n_ref))
    )
    return CaseMatchResult(
        pairs=tuple(pairs),
        precision=precision,
        recall=recall,
        f1=f1,
        any_match=n_matched >= 1,
        exact_match=n_matched == n_pred == n_ref,
        top1=top1,
        n_pred=n_pred,
        n_ref=n_ref,
    )


@dataclass(frozen=True)
class MicroSummary:
    micro_p: float
    micro_r: float
    micro_f1: float
    top1_acc: float
    anymatch_acc: float
    avg_n_pred: float
    n_cases: int


def micro_aggregate(results: list[CaseMatchResult]) -> MicroSummary:
    """Corpus-level micro precision/recall/F1 plus top-1 and any-match rates."""
    if not results:
        raise EmptyInputError("no case results to aggregate")
    n_cases = len(results)
    matched = sum(len(r.pairs) for r in results)
    total_pred = sum(r.n_pred for r in results)
    total_ref = sum(r.n_ref for r in results)
    micro_p = matched / total_pred if total_pred else 0.0
    micro_r = matched / total_ref if total_ref else 0.0
    micro_f1 = 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r > 0 else 0.0
    return MicroSummary(
        micro_p=micro_p,
        micro_r=micro_r,
        micro_f1=micro_f1,
        top1_acc=sum(r.top1 for r in results) / n_cases,
        anymatch_acc=sum(r.any_match for r in results) / n_cases,
        avg_n_pred=total_pred / n_cases,
        n_cases=n_cases,
    )
