import math
import random

import numpy as np
import pytest

from dxbench.corpus import Difficulty
from dxbench.matching import MatchConfig
from dxbench.stats import (
    ConfusionMatrix2x2,
    DegenerateInputError,
    LengthMismatchError,
    ManualRating,
    MissingStratumError,
    StdWeights,
    UndefinedKappaError,
    ZeroVarianceError,
    bias_correction,
    binary_agreement,
    cohen_kappa,
    cronbach_alpha,
    hedges_g,
    mann_whitney_u,
    ordinal_summary,
    paired_bootstrap,
    pairwise_concordance,
    pairwise_f1,
    standardize,
    three_class_agreement,
)
from oracles import (
    oracle_cronbach,
    oracle_kappa,
    oracle_mwu_exact_p,
    oracle_standardize,
)

E, M, H = Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD


# -- standardization -----------------------------------------------------------

def test_std_weights_default():
    w = StdWeights()
    assert w.w_easy == pytest.approx(3 / 13)
    assert w.w_medium == pytest.approx(6 / 13)
    assert w.w_hard == pytest.approx(4 / 13)


def test_std_weights_validation():
    with pytest.raises(ValueError):
        StdWeights(w_easy=-0.1, w_medium=0.6, w_hard=0.5)
    with pytest.raises(ValueError):
        StdWeights(w_easy=0.5, w_medium=0.5, w_hard=0.5)


def test_standardize_constant_invariance():
    values = [0.37] * 13
    difficulties = [E] * 3 + [M] * 6 + [H] * 4
    assert standardize(values, difficulties) == pytest.approx(0.37, abs=1e-12)


def test_standardize_single_stratum_weight():
    values = [1, 1, 1] + [0] * 6 + [0] * 4
    difficulties = [E] * 3 + [M] * 6 + [H] * 4
    assert standardize(values, difficulties) == pytest.approx(3 / 13, abs=1e-12)


def test_standardize_matches_plain_arithmetic_oracle():
    rng = random.Random(3)
    for _ in range(50):
        difficulties = [rng.choice([E, M, H]) for _ in range(13)]
        while not all(d in difficulties for d in (E, M, H)):
            difficulties = [rng.choice([E, M, H]) for _ in range(13)]
        values = [rng.random() for _ in range(13)]
        expected = oracle_standardize(
            values, difficulties, {E: 3 / 13, M: 6 / 13, H: 4 / 13}
        )
        assert standardize(values, difficulties) == pytest.approx(expected, abs=1e-12)


def test_standardize_linearity():
    rng = random.Random(5)
    difficulties = [E, E, M, M, M, H, H]
    x = [rng.random() for _ in difficulties]
    y = [rng.random() for _ in difficulties]
    a, b = 2.5, -0.75
    combo = [a * xi + b * yi for xi, yi in zip(x, y)]
    assert standardize(combo, difficulties) == pytest.approx(
        a * standardize(x, difficulties) + b * standardize(y, difficulties), abs=1e-12
    )


def test_standardize_missing_stratum():
    with pytest.raises(MissingStratumError):
        standardize([1.0, 1.0], [E, M])


def test_standardize_skips_zero_weight_strata():
    w = StdWeights(w_easy=0.5, w_medium=0.5, w_hard=0.0)
    assert standardize([1.0, 0.0], [E, M], w) == pytest.approx(0.5)


def test_standardize_length_mismatch():
    with pytest.raises(LengthMismatchError):
        standardize([1.0], [E, M])


# -- effect size ---------------------------------------------------------------

def test_bias_correction_n7():
    assert bias_correction(7) == pytest.approx(0.8696, abs=1e-4)
    assert bias_correction(7) == pytest.approx(20 / 23)


def test_hedges_g_zero_mean():
    assert hedges_g([-1.0, 1.0, -2.0, 2.0]) == 0.0


def test_hedges_g_zero_variance():
    with pytest.raises(ZeroVarianceError):
        hedges_g([1.0, 1.0, 1.0])


def test_hedges_g_scale_invariant():
    diffs = [0.1, 0.4, -0.2, 0.3, 0.25]
    assert hedges_g([3.7 * d for d in diffs]) == pytest.approx(hedges_g(diffs))


def test_hedges_g_known_value():
    # mean 0.5, sd 0.5773502691896258 (n=4), J = 1 - 3/11
    diffs = [0.0, 0.0, 1.0, 1.0]
    expected = (1 - 3 / 11) * 0.5 / np.std(diffs, ddof=1)
    assert hedges_g(diffs) == pytest.approx(expected, abs=1e-15)


# -- paired bootstrap ----------------------------------------------------------

def test_bootstrap_zero_diffs():
    r = paired_bootstrap([1.0] * 5, [1.0] * 5, n_replicates=2000, seed=42)
    assert r.mean_delta == 0.0
    assert (r.ci_low, r.ci_high) == (0.0, 0.0)
    assert r.p_two_sided == 1.0
    assert math.isnan(r.hedges_g)


def test_bootstrap_all_positive_diffs_hits_floor():
    base = [0.0] * 6
    inter = [1.0] * 6
    r = paired_bootstrap(base, inter, n_replicates=2000, seed=42)
    assert r.mean_delta == 1.0
    assert (r.ci_low, r.ci_high) == (1.0, 1.0)
    assert r.p_two_sided == 1 / 2000


def test_bootstrap_deterministic():
    rng = np.random.default_rng(9)
    base = rng.random(7).tolist()
    inter = rng.random(7).tolist()
    a = paired_bootstrap(base, inter, n_replicates=5000, seed=42)
    b = paired_bootstrap(base, inter, n_replicates=5000, seed=42)
    assert a == b
    c = paired_bootstrap(base, inter, n_replicates=5000, seed=43)
    assert c != a


def test_bootstrap_sign_antisymmetry():
    rng = np.random.default_rng(17)
    base = rng.random(9).tolist()
    inter = (rng.random(9) + 0.25).tolist()
    fwd = paired_bootstrap(base, inter, n_replicates=4000, seed=42)
    rev = paired_bootstrap(inter, base, n_replicates=4000, seed=42)
    assert rev.mean_delta == -fwd.mean_delta
    assert rev.ci_low == -fwd.ci_high
    assert rev.ci_high == -fwd.ci_low
    assert rev.p_two_sided == fwd.p_two_sided


def test_bootstrap_validation():
    with pytest.raises(LengthMismatchError):
        paired_bootstrap([1.0, 2.0], [1.0])
    with pytest.raises(DegenerateInputError):
        paired_bootstrap([1.0], [2.0])


def test_bootstrap_ci_ordered_and_p_floor():
    rng = np.random.default_rng(29)
    base = rng.random(8).tolist()
    inter = rng.random(8).tolist()
    r = paired_bootstrap(base, inter, n_replicates=1000, seed=1)
    assert r.ci_low <= r.ci_high
    assert r.p_two_sided >= 1 / 1000
    assert r.p_two_sided <= 1.0


# -- agreement -----------------------------------------------------------------

def test_binary_agreement_fixture():
    cm = ConfusionMatrix2x2(tp=168, tn=31, fp=0, fn=165)
    assert binary_agreement(cm) == pytest.approx(0.547, abs=1e-3)
    assert binary_agreement(cm) == pytest.approx(199 / 364)


def test_cohen_kappa_fixture():
    cm = ConfusionMatrix2x2(tp=168, tn=31, fp=0, fn=165)
    assert cohen_kappa(cm) == pytest.approx(0.148, abs=1e-3)
    assert cohen_kappa(cm) == pytest.approx(oracle_kappa(168, 31, 0, 165), abs=1e-15)


def test_agreement_trivial_cases():
    assert binary_agreement(ConfusionMatrix2x2(tp=5, tn=0, fp=0, fn=0)) == 1.0
    assert binary_agreement(ConfusionMatrix2x2(tp=0, tn=0, fp=1, fn=1)) == 0.0


def test_kappa_perfect_diagonal():
    assert cohen_kappa(ConfusionMatrix2x2(tp=10, tn=10, fp=0, fn=0)) == 1.0


def test_kappa_undefined_when_expected_agreement_is_one():
    with pytest.raises(UndefinedKappaError):
        cohen_kappa(ConfusionMatrix2x2(tp=10, tn=0, fp=0, fn=0))


def test_kappa_near_zero_for_independent_raters():
    rng = np.random.default_rng(42)
    a = rng.random(20000) < 0.5
    b = rng.random(20000) < 0.5
    cm = ConfusionMatrix2x2(
        tp=int(np.sum(a & b)),
        tn=int(np.sum(~a & ~b)),
        fp=int(np.sum(a & ~b)),
        fn=int(np.sum(~a & b)),
    )
    assert abs(cohen_kappa(cm)) < 0.02


def test_kappa_bounds():
    rng = np.random.default_rng(7)
    for _ in range(200):
        counts = rng.integers(0, 30, size=4)
        if counts.sum() == 0:
            continue
        cm = ConfusionMatrix2x2(*[int(c) for c in counts])
        try:
            k = cohen_kappa(cm)
        except UndefinedKappaError:
            continue
        assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12


def test_confusion_matrix_validation():
    with pytest.raises(ValueError):
        ConfusionMatrix2x2(tp=-1, tn=0, fp=0, fn=1)
    with pytest.raises(ValueError):
        ConfusionMatrix2x2(tp=0, tn=0, fp=0, fn=0)


def test_three_class_agreement():
    assert three_class_agreement(["a", "b"], ["a", "b"]) == 1.0
    assert three_class_agreement(["a", "b"], ["b", "a"]) == 0.0
    labels_a = ["complete"] * 387 + ["partial"] * 613
    labels_b = ["complete"] * 387 + ["wrong"] * 613
    assert three_class_agreement(labels_a, labels_b) == pytest.approx(0.387)


# -- manual ordinal ------------------------------------------------------------

def test_manual_rating_validation():
    with pytest.raises(ValueError):
        ManualRating("p1", "c1", "S1", 0.7)


def test_ordinal_summary_basic():
    ratings = [
        ManualRating("p1", "c1", "S1", 1.0),
        ManualRating("p1", "c2", "S1", 0.5),
        ManualRating("p1", "c3", "S1", 0.0),
    ]
    st = ordinal_summary(ratings)
    assert st.mean == pytest.approx(0.5)
    assert st.binary_rate == pytest.approx(2 / 3)
    assert st.complete_rate == pytest.approx(1 / 3)


def test_ordinal_summary_session_fixture():
    # 65 complete + 18 partial + 8 wrong = 91 ratings
    ordinals = [1.0] * 65 + [0.5] * 18 + [0.0] * 8
    ratings = [
        ManualRating(f"p{i%7}", f"c{i}", "S1", o) for i, o in enumerate(ordinals)
    ]
    st = ordinal_summary(ratings)
    assert st.n == 91
    assert st.mean == pytest.approx(0.813, abs=5e-4)
    assert st.binary_rate == pytest.approx(0.912, abs=5e-4)
    assert st.complete_rate == pytest.approx(0.714, abs=5e-4)


def test_ordinal_summary_grouped():
    ratings = [
        ManualRating("p1", "c1", "S1", 1.0),
        ManualRating("p2", "c1", "S2", 0.0),
    ]
    grouped = ordinal_summary(ratings, group_by=lambda r: r.session_id)
    assert grouped["S1"].mean == 1.0
    assert grouped["S2"].mean == 0.0


# -- cronbach ------------------------------------------------------------------

def test_cronbach_duplicated_items():
    matrix = [[1.0, 1.0], [3.0, 3.0], [5.0, 5.0], [2.0, 2.0]]
    assert cronbach_alpha(matrix) == pytest.approx(1.0, abs=1e-12)
    assert oracle_cronbach(matrix) == pytest.approx(1.0, abs=1e-12)


def test_cronbach_independent_items_near_zero():
    rng = np.random.default_rng(12)
    matrix = rng.random((4000, 6))
    assert abs(cronbach_alpha(matrix.tolist())) < 0.1


def test_cronbach_matches_oracle():
    rng = np.random.default_rng(15)
    matrix = (rng.random((9, 6)) * 4 + 1).tolist()
    assert cronbach_alpha(matrix) == pytest.approx(oracle_cronbach(matrix), abs=1e-12)


def test_cronbach_validation():
    with pytest.raises(DegenerateInputError):
        cronbach_alpha([[1.0, 2.0]])


# -- Mann-Whitney ---------------------------------------------------------------

def test_mwu_exact_small_sample():
    r = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
    assert r.method == "exact"
    assert r.u == 0.0
    assert r.p_two_sided == pytest.approx(1 / 3)


def test_mwu_identical_samples():
    r = mann_whitney_u([5.0, 6.0], [5.0, 6.0])
    assert r.p_two_sided == 1.0


def test_mwu_all_tied():
    r = mann_whitney_u([2.0, 2.0, 2.0], [2.0, 2.0])
    assert r.u == 3.0  # |a||b|/2 with midranks


def test_mwu_matches_enumeration_oracle():
    rng = random.Random(19)
    for _ in range(25):
        a = [float(rng.randint(0, 5)) for _ in range(rng.randint(2, 5))]
        b = [float(rng.randint(0, 5)) for _ in range(rng.randint(2, 5))]
        r = mann_whitney_u(a, b)
        assert r.method == "exact"
        assert r.p_two_sided == pytest.approx(oracle_mwu_exact_p(a, b), abs=1e-12)


def test_mwu_normal_approximation_for_larger_samples():
    rng = np.random.default_rng(21)
    a = rng.normal(0.0, 1.0, 30).tolist()
    b = rng.normal(2.0, 1.0, 30).tolist()
    r = mann_whitney_u(a, b)
    assert r.method == "normal"
    assert 0.0 < r.p_two_sided < 0.001


def test_mwu_normal_matches_scipy():
    from scipy import stats as scipy_stats

    rng = np.random.default_rng(33)
    for _ in range(20):
        a = rng.normal(0.0, 1.0, int(rng.integers(8, 40))).tolist()
        b = rng.normal(rng.uniform(-1, 1), 1.0, int(rng.integers(8, 40))).tolist()
        mine = mann_whitney_u(a, b)
        ref = scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
        assert mine.u == pytest.approx(float(ref.statistic))
        assert mine.p_two_sided == pytest.approx(float(ref.pvalue), abs=1e-12)


def test_mwu_exact_matches_scipy_without_ties():
    from scipy import stats as scipy_stats

    rng = np.random.default_rng(35)
    for _ in range(20):
        pool = rng.permutation(40)[:9].astype(float)
        k = int(rng.integers(2, 8))
        a, b = pool[:k].tolist(), pool[k:].tolist()
        mine = mann_whitney_u(a, b)
        assert mine.method == "exact"
        ref = scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert mine.p_two_sided == pytest.approx(float(ref.pvalue), abs=1e-12)


def test_mwu_rejects_empty():
    with pytest.raises(DegenerateInputError):
        mann_whitney_u([], [1.0])


# -- concordance ----------------------------------------------------------------

class FakeLog:
    def __init__(self, participant_id, expertise, case_id, session_id, condition, diagnoses):
        self.participant_id = participant_id
        self.expertise = expertise
        self.case_id = case_id
        self.session_id = session_id
        self.condition = condition
        self.final_diagnoses = tuple(diagnoses)


def _logs(listing):
    cfg = {"s": "senior", "r": "resident"}
    out = []
    for participant, kind, case_id, diagnoses in listing:
        out.append(FakeLog(participant, cfg[kind], case_id, "S1", "baseline", diagnoses))
    return out


CASES_BY_DIFFICULTY = {
    "c-easy": Difficulty.EASY,
    "c-med": Difficulty.MEDIUM,
    "c-hard": Difficulty.HARD,
}


def test_pairwise_f1_symmetric():
    cfg = MatchConfig(threshold=80.0)
    a = ["heart failure", "pneumonia"]
    b = ["congestive heart failure"]
    assert pairwise_f1(a, b, cfg) == pytest.approx(pairwise_f1(b, a, cfg))


def test_pairwise_concordance_identical_lists():
    listing = []
    for participant, kind in [("p1", "s"), ("p2", "s"), ("p3", "r")]:
        for case_id in CASES_BY_DIFFICULTY:
            listing.append((participant, kind, case_id, ["pneumonia"]))
    scores = pairwise_concordance(_logs(listing), CASES_BY_DIFFICULTY, MatchConfig())
    assert scores
    for s in scores:
        assert s.value == pytest.approx(1.0)


def test_pairwise_concordance_pair_type_split():
    listing = []
    for participant, kind in [("p1", "s"), ("p2", "s"), ("p3", "r"), ("p4", "r")]:
        for case_id in CASES_BY_DIFFICULTY:
            listing.append((participant, kind, case_id, ["sepsis"]))
    scores = pairwise_concordance(_logs(listing), CASES_BY_DIFFICULTY, MatchConfig())
    kinds = {(s.participant_id, s.pair_type) for s in scores}
    # every participant has both a within and a cross record here
    assert len(kinds) == 8


def test_pairwise_concordance_disjoint_lists():
    listing = []
    diagnoses = {"p1": ["appendicitis"], "p2": ["miliary tuberculosis"]}
    for participant in diagnoses:
        for case_id in CASES_BY_DIFFICULTY:
            listing.append((participant, "s", case_id, diagnoses[participant]))
    scores = pairwise_concordance(_logs(listing), CASES_BY_DIFFICULTY, MatchConfig())
    for s in scores:
        assert s.value == 0.0
