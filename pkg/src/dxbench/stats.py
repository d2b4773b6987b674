"""Statistical layer: difficulty standardization, paired bootstrap inference,
effect sizes, agreement statistics, ordinal scoring, rank tests, and
inter-clinician concordance.

Randomness comes from numpy's PCG64 generator; together with a fixed seed and
sequential replicate sums this makes every bootstrap bit-reproducible.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from dxbench._kernels import replicate_means
from dxbench.corpus import Difficulty
from dxbench.matching import MatchConfig, match_sets

if TYPE_CHECKING:
    from dxbench.dialogue import EncounterLog

RNG_ALGORITHM = "pcg64"  # numpy.random.default_rng; fixed so seeds are portable


class LengthMismatchError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


class MissingStratumError(ValueError):
    def __init__(self, difficulty: Difficulty):
        self.difficulty = difficulty
        super().__init__(f"no cases in weighted stratum {difficulty.value}")


class ZeroVarianceError(ValueError):
    pass


class UndefinedKappaError(ValueError):
    pass


class InsufficientParticipantsError(ValueError):
    pass


@dataclass(frozen=True)
class StdWeights:
    """Fixed difficulty weights used to standardize session metrics."""

    w_easy: float = 3 / 13
    w_medium: float = 6 / 13
    w_hard: float = 4 / 13

    def __post_init__(self) -> None:
        weights = (self.w_easy, self.w_medium, self.w_hard)
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    def weight(self, difficulty: Difficulty) -> float:
        return {
            Difficulty.EASY: self.w_easy,
            Difficulty.MEDIUM: self.w_medium,
            Difficulty.HARD: self.w_hard,
        }[difficulty]


def standardize(
    values: Sequence[float],
    difficulties: Sequence[Difficulty],
    weights: StdWeights = StdWeights(),
) -> float:
    """Mean within each difficulty stratum, then weighted sum of the means."""
    if len(values) != len(difficulties):
        raise LengthMismatchError("values and difficulties differ in length")
    by_stratum: dict[Difficulty, list[float]] = defaultdict(list)
    for value, difficulty in zip(values, difficulties):
        by_stratum[difficulty].append(value)
    total = 0.0
    for difficulty in Difficulty:
        w = weights.weight(difficulty)
        if w == 0.0:
            continue
        stratum = by_stratum.get(difficulty)
        if not stratum:
            raise MissingStratumError(difficulty)
        total += w * (sum(stratum) / len(stratum))
    return total


def bias_correction(n: int) -> float:
    """Small-sample correction J = 1 - 3/(4n - 5)."""
    return 1.0 - 3.0 / (4.0 * n - 5.0)


def hedges_g(diffs: Sequence[float]) -> float:
    """Bias-corrected standardized mean difference of paired diffs."""
    n = len(diffs)
    if n < 2:
        raise DegenerateInputError("need at least 2 paired differences")
    arr = np.asarray(diffs, dtype=np.float64)
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("differences have zero variance")
    return bias_correction(n) * float(np.mean(arr)) / sd


def _percentile_pair(sorted_vals: np.ndarray, q_low: float = 0.025) -> tuple[float, float]:
    # Mirrored linear interpolation: the high percentile is computed from the
    # right end with the same offsets, so negating the data exactly negates
    # and swaps the pair.
    n = len(sorted_vals)
    pos = (n - 1) * q_low
    i = int(math.floor(pos))
    t = pos - i
    if t == 0.0:
        return float(sorted_vals[i]), float(sorted_vals[n - 1 - i])
    low = sorted_vals[i] + t * (sorted_vals[i + 1] - sorted_vals[i])
    high = sorted_vals[n - 1 - i] - t * (sorted_vals[n - 1 - i] - sorted_vals[n - 2 - i])
    return float(low), float(high)


@dataclass(frozen=True)
class BootstrapResult:
    mean_delta: float
    ci_low: float
    ci_high: float
    p_two_sided: float
    hedges_g: float
    n_participants: int
    replicates: int
    seed: int


def paired_bootstrap(
    baseline: Sequence[float],
    interactive: Sequence[float],
    n_replicates: int = 20000,
    seed: int = 42,
) -> BootstrapResult:
    """Percentile bootstrap over participants for the paired mean difference.

    Resamples participants with replacement, records each replicate's mean
    difference, and reports the 95% percentile CI plus a two-sided p-value
    (twice the smaller tail fraction, floored at 1/B). hedges_g is NaN when
    the observed differences have zero variance.
    """
    if len(baseline) != len(interactive):
        raise LengthMismatchError("paired samples differ in length")
    n = len(baseline)
    if n < 2:
        raise DegenerateInputError("need at least 2 participants")
    diffs = np.asarray(interactive, dtype=np.float64) - np.asarray(baseline, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_replicates, n))
    means = replicate_means(diffs, idx)
    means.sort()
    ci_low, ci_high = _percentile_pair(means)
    frac_le = float(np.count_nonzero(means <= 0.0)) / n_replicates
    frac_ge = float(np.count_nonzero(means >= 0.0)) / n_replicates
    p = min(1.0, max(1.0 / n_replicates, 2.0 * min(frac_le, frac_ge)))
    try:
        g = hedges_g(diffs)
    except ZeroVarianceError:
        g = float("nan")
    return BootstrapResult(
        mean_delta=float(np.mean(diffs)),
        ci_low=ci_low,
        ci_high=ci_high,
        p_two_sided=p,
        hedges_g=g,
        n_participants=n,
        replicates=n_replicates,
        seed=seed,
    )


@dataclass(frozen=True)
class ConfusionMatrix2x2:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")
        if self.total == 0:
            raise ValueError("confusion matrix is empty")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def binary_agreement(cm: ConfusionMatrix2x2) -> float:
    return (cm.tp + cm.tn) / cm.total


def cohen_kappa(cm: ConfusionMatrix2x2) -> float:
    """Chance-corrected agreement with marginal-product expected agreement."""
    total = cm.total
    p_o = (cm.tp + cm.tn) / total
    a_pos = (cm.tp + cm.fp) / total
    b_pos = (cm.tp + cm.fn) / total
    p_e = a_pos * b_pos + (1 - a_pos) * (1 - b_pos)
    if p_e == 1.0:
        raise UndefinedKappaError("expected agreement is 1")
    return (p_o - p_e) / (1 - p_e)


def three_class_agreement(labels_a: Sequence, labels_b: Sequence) -> float:
    if len(labels_a) != len(labels_b):
        raise LengthMismatchError("label vectors differ in length")
    if not labels_a:
        raise DegenerateInputError("empty label vectors")
    return sum(a == b for a, b in zip(labels_a, labels_b)) / len(labels_a)


ORDINAL_VALUES = (0.0, 0.5, 1.0)  # wrong / partially correct / completely correct


@dataclass(frozen=True)
class ManualRating:
    participant_id: str
    case_id: str
    session_id: str
    ordinal: float

    def __post_init__(self) -> None:
        if self.ordinal not in ORDINAL_VALUES:
            raise ValueError(f"ordinal must be one of {ORDINAL_VALUES}")


@dataclass(frozen=True)
class OrdinalStats:
    n: int
    mean: float
    binary_rate: float
    complete_rate: float


def _ordinal_stats(ordinals: Sequence[float]) -> OrdinalStats:
    n = len(ordinals)
    return OrdinalStats(
        n=n,
        mean=sum(ordinals) / n,
        binary_rate=sum(o >= 0.5 for o in ordinals) / n,
        complete_rate=sum(o == 1.0 for o in ordinals) / n,
    )


def ordinal_summary(
    ratings: Iterable[ManualRating],
    group_by: Callable[[ManualRating], Hashable] | None = None,
):
    """Mean ordinal, binary-correct rate, and completely-correct rate.

    With group_by (e.g. by session, or by difficulty via a corpus lookup
    closure) returns {group: OrdinalStats}; otherwise a single OrdinalStats.
    """
    ratings = list(ratings)
    if not ratings:
        raise DegenerateInputError("no ratings")
    if group_by is None:
        return _ordinal_stats([r.ordinal for r in ratings])
    grouped: dict[Hashable, list[float]] = defaultdict(list)
    for rating in ratings:
        grouped[group_by(rating)].append(rating.ordinal)
    return {group: _ordinal_stats(vals) for group, vals in grouped.items()}


def cronbach_alpha(item_matrix: Sequence[Sequence[float]]) -> float:
    """Internal consistency over a respondents x items matrix."""
    matrix = np.asarray(item_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2 or matrix.shape[1] < 2:
        raise DegenerateInputError("need at least 2 respondents and 2 items")
    k = matrix.shape[1]
    item_vars = matrix.var(axis=0, ddof=1)
    total_var = matrix.sum(axis=1).var(ddof=1)
    if total_var == 0.0:
        raise ZeroVarianceError("total-score variance is zero")
    return k / (k - 1) * (1.0 - float(item_vars.sum()) / float(total_var))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_two_sided: float
    method: str  # "exact" or "normal"


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


EXACT_MWU_CUTOFF = 10


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U with midranks.

    Exact enumeration of all group assignments when n1+n2 <= 10; otherwise a
    tie-corrected normal approximation with continuity correction.
    """
    a = list(a)
    b = list(b)
    if not a or not b:
        raise DegenerateInputError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    u_obs = _u_statistic(a, b)
    if n1 + n2 <= EXACT_MWU_CUTOFF:
        pooled = list(a) + list(b)
        crit = min(u_obs, n1 * n2 - u_obs)
        hits = 0
        total = 0
        for subset in itertools.combinations(range(len(pooled)), n1):
            chosen = set(subset)
            group_a = [pooled[i] for i in subset]
            group_b = [pooled[i] for i in range(len(pooled)) if i not in chosen]
            u = _u_statistic(group_a, group_b)
            if min(u, n1 * n2 - u) <= crit + 1e-9:
                hits += 1
            total += 1
        return MannWhitneyResult(u=u_obs, p_two_sided=hits / total, method="exact")

    pooled = np.concatenate([np.asarray(a, float), np.asarray(b, float)])
    n = len(pooled)
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts))
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0.0:
        return MannWhitneyResult(u=u_obs, p_two_sided=1.0, method="normal")
    mu = n1 * n2 / 2.0
    z = max(0.0, abs(u_obs - mu) - 0.5) / math.sqrt(variance)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return MannWhitneyResult(u=u_obs, p_two_sided=p, method="normal")


WITHIN = "within"
CROSS = "cross"


@dataclass(frozen=True)
class ConcordanceScore:
    participant_id: str
    expertise: str
    session_id: str
    condition: str
    pair_type: str  # within or cross
    value: float
    n_points: int


def pairwise_f1(
    diagnoses_a: Sequence[str],
    diagnoses_b: Sequence[str],
    cfg: MatchConfig,
) -> float:
    """Diagnosis-set F1 between two clinicians' lists on one case.

    Computed once per unordered pair with a fixed orientation, so the
    recorded value is symmetric by construction.
    """
    return match_sets(list(diagnoses_a), list(diagnoses_b), cfg).f1


def pairwise_concordance(
    logs: Sequence["EncounterLog"],
    difficulties: Mapping[str, Difficulty],
    cfg: MatchConfig,
    weights: StdWeights = StdWeights(),
) -> list[ConcordanceScore]:
    """Per-participant standardized pairwise F1, split within/cross expertise.

    For every unordered pair of participants and every case both answered,
    computes the pairwise F1 (orientation fixed by participant-id order) and
    assigns the value to both participants under the pair's type; each
    participant's values are then difficulty-standardized.
    """
    by_participant: dict[str, dict[str, "EncounterLog"]] = defaultdict(dict)
    meta: dict[str, "EncounterLog"] = {}
    for log in logs:
        by_participant[log.participant_id][log.case_id] = log
        meta[log.participant_id] = log
    participants = sorted(by_participant)
    if len(participants) < 2:
        raise InsufficientParticipantsError("need at least 2 participants")

    points: dict[tuple[str, str], list[tuple[str, float]]] = defaultdict(list)
    for p, q in itertools.combinations(participants, 2):
        pair_type = WITHIN if meta[p].expertise == meta[q].expertise else CROSS
        shared = sorted(set(by_participant[p]) & set(by_participant[q]))
        for case_id in shared:
            f1 = pairwise_f1(
                by_participant[p][case_id].final_diagnoses,
                by_participant[q][case_id].final_diagnoses,
                cfg,
            )
            points[(p, pair_type)].append((case_id, f1))
            points[(q, pair_type)].append((case_id, f1))

    scores = []
    for (participant, pair_type), values in sorted(points.items()):
        case_difficulties = [difficulties[case_id] for case_id, _ in values]
        standardized = standardize([v for _, v in values], case_difficulties, weights)
        log = meta[participant]
        scores.append(
            ConcordanceScore(
                participant_id=participant,
                expertise=_plain(log.expertise),
                session_id=log.session_id,
                condition=_plain(log.condition),
                pair_type=pair_type,
                value=standardized,
                n_points=len(values),
            )
        )
    return scores


def _plain(value) -> str:
    return value.value if hasattr(value, "value") else str(value)
