import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftguard import (
    CalibrationError,
    ConfigurationError,
    CrossConformalEvaluator,
    DomainError,
    Example,
    InductiveEvaluator,
    NearestCentroid,
    SearchSpec,
    StateError,
    ThresholdSet,
    TransductiveEvaluator,
    alpha_assessment,
    build_dataset,
    evaluator_from_state,
    load_evaluator_state,
    pvalue,
)
from driftguard.ncm import Ncm, PreparedNcm

from conftest import brute_pvalue, gaussian_dataset, point


# -- p-value engine ------------------------------------------------------------

def test_pvalue_direct_count():
    assert pvalue([0.1, 0.2, 0.3, 0.4], 0.25) == 0.5


def test_pvalue_extremes():
    pool = [0.5, 0.7, 0.9]
    assert pvalue(pool, 0.4) == 1.0
    assert pvalue(pool, 0.95) == 0.0


def test_pvalue_ties_count():
    assert pvalue([0.3, 0.3, 0.3], 0.3) == 1.0


def test_pvalue_empty_pool():
    with pytest.raises(DomainError):
        pvalue([], 0.1)


@given(
    pool=st.lists(st.floats(-50, 50).map(lambda v: round(v, 1)), min_size=1, max_size=60),
    alpha=st.floats(-55, 55).map(lambda v: round(v, 1)),
)
@settings(max_examples=300, deadline=None)
def test_pvalue_matches_brute_force(pool, alpha):
    assert pvalue(pool, alpha) == brute_pvalue(pool, alpha)


# -- a strictly monotone NCM wrapper used for the invariance tests ---------------

class MonotoneNcm(Ncm):
    def __init__(self, inner, fn):
        self.inner = inner
        self.fn = fn
        self.name = inner.name

    def prepare(self, model, bag):
        return _MonotonePrepared(self.inner.prepare(model, bag), self.fn)


class _MonotonePrepared(PreparedNcm):
    def __init__(self, inner, fn):
        self.inner = inner
        self.fn = fn
        self.label_space = inner.label_space

    def score(self, label, example):
        return self.fn(self.inner.score(label, example))

    def member_ids(self, label):
        return self.inner.member_ids(label)

    def pool_scores(self, label):
        return np.array([self.fn(v) for v in self.inner.pool_scores(label)])


# -- transductive evaluator ------------------------------------------------------


def dense(example, dim):
    vec = np.zeros(dim)
    for i, v in example.features.items():
        vec[i] = v
    return vec


def loo_oracle(train):
    """Literal leave-one-out conformal calibration, written independently."""
    dim = train.dimensionality
    results = {}
    examples = list(train.examples)
    for i, z in enumerate(examples):
        rest = examples[:i] + examples[i + 1 :]
        centroids = {}
        bags = {}
        for lab in train.label_space:
            members = sorted((e for e in rest if e.label == lab), key=lambda e: e.id)
            rows = np.stack([dense(e, dim) for e in members])
            bags[lab] = rows
            centroids[lab] = np.mean(rows, axis=0)
        # argmax of negated distance, ties toward earlier labels
        best, best_score = None, None
        zvec = dense(z, dim)
        for lab in train.label_space:
            d = zvec - centroids[lab]
            s = -math.sqrt(float(np.dot(d, d)))
            if best_score is None or s > best_score:
                best, best_score = lab, s
        pvals = {}
        for lab in train.label_space:
            rows = bags[lab]
            mean_full = np.mean(rows, axis=0)
            d = zvec - mean_full
            alpha = math.sqrt(float(np.dot(d, d)))
            pool = []
            for j in range(len(rows)):
                others = np.mean(np.delete(rows, j, axis=0), axis=0)
                dj = rows[j] - others
                pool.append(math.sqrt(float(np.dot(dj, dj))))
            pvals[lab] = sum(1 for a in pool if a >= alpha) / len(pool)
        others = [pvals[lab] for lab in train.label_space if lab != best]
        results[z.id] = (best, pvals, pvals[best], 1.0 - max(others))
    return results


def twelve_point_train():
    return gaussian_dataset(6, {"neg": (0.0, 0.0), "pos": (3.0, 0.0)}, 1.0, seed=21)


def test_tce_at_full_k_equals_loo_oracle():
    train = twelve_point_train()
    ev = TransductiveEvaluator(NearestCentroid(), "centroid", k=None, seed=4).fit(train)
    assert ev.kind == "tce"
    oracle = loo_oracle(train)
    assert len(ev.calibration_records_) == len(train)
    for rec in ev.calibration_records_:
        best, pvals, cred, conf = oracle[rec.example_id]
        assert rec.predicted == best
        assert rec.pvals == pvals
        assert rec.credibility == cred
        assert rec.confidence == conf


def test_approx_tce_k2_separable_all_correct():
    train = gaussian_dataset(20, {"neg": (-5.0, 0.0), "pos": (5.0, 0.0)}, 0.4, seed=2)
    ev = TransductiveEvaluator(NearestCentroid(), "centroid", k=2, seed=4).fit(train)
    assert ev.kind == "approx-tce"
    creds = [r.credibility for r in ev.calibration_records_]
    assert all(r.predicted == r.ground_truth for r in ev.calibration_records_)
    # credibility spans the unit interval: extreme points count no pool entries
    assert 0.0 <= min(creds) <= 0.2
    assert max(creds) == 1.0


def test_tce_deterministic_under_seed():
    train = twelve_point_train()
    a = TransductiveEvaluator(NearestCentroid(), "centroid", k=3, seed=9).fit(train)
    b = TransductiveEvaluator(NearestCentroid(), "centroid", k=3, seed=9).fit(train)
    assert a.calibration_records_ == b.calibration_records_


def test_tce_fold_missing_class_names_fold_and_class():
    # 2 negs: with k=2 some remainder keeps only 1 neg -> must refuse
    examples = [point(f"p{i}", (float(i), 0.0), "pos", i) for i in range(6)]
    examples += [point("n0", (10.0, 0.0), "neg", 6), point("n1", (11.0, 0.0), "neg", 7)]
    train = build_dataset(examples, dimensionality=2)
    with pytest.raises(CalibrationError, match=r"fold \d.*neg"):
        TransductiveEvaluator(NearestCentroid(), "centroid", k=4, seed=0).fit(train)


def test_tce_k_bounds():
    train = twelve_point_train()
    with pytest.raises(ConfigurationError):
        TransductiveEvaluator(NearestCentroid(), "centroid", k=1).fit(train)
    with pytest.raises(ConfigurationError):
        TransductiveEvaluator(NearestCentroid(), "centroid", k=13).fit(train)


# -- inductive evaluator -----------------------------------------------------------

def hand_trace_train():
    """12 one-dimensional points whose ICE p-values are enumerable by hand."""
    proper = [
        point("p0", (0.0,), "pos", 0),
        point("p1", (2.0,), "pos", 1),
        point("p2", (4.0,), "pos", 2),
        point("q0", (10.0,), "neg", 3),
        point("q1", (12.0,), "neg", 4),
        point("q2", (14.0,), "neg", 5),
    ]
    cal = [
        point("cp0", (1.0,), "pos", 6),
        point("cp1", (2.0,), "pos", 7),
        point("cp2", (6.0,), "pos", 8),
        point("cn0", (9.0,), "neg", 9),
        point("cn1", (10.0,), "neg", 10),
        point("cn2", (14.0,), "neg", 11),
    ]
    return build_dataset(proper + cal)


def test_ice_hand_traced_pvalues():
    ev = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.5).fit(
        hand_trace_train()
    )
    by_id = {r.example_id: r for r in ev.calibration_records_}
    assert len(by_id) == 6
    # credibility: leave-self-out count within the predicted class pool
    assert by_id["cp0"].credibility == 0.5
    assert by_id["cp1"].credibility == 1.0
    assert by_id["cp2"].credibility == 0.0
    assert by_id["cn0"].credibility == 0.5
    assert by_id["cn1"].credibility == 1.0
    assert by_id["cn2"].credibility == 0.0
    for rec in by_id.values():
        assert rec.predicted == rec.ground_truth
        assert rec.confidence == 1.0


def test_ice_fraction_bounds():
    train = hand_trace_train()
    for frac in (0.0, 1.0):
        with pytest.raises(ConfigurationError):
            InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=frac).fit(train)


def test_ice_missing_calibration_class():
    examples = [point(f"p{i}", (float(i),), "pos", i) for i in range(8)]
    examples += [point("n0", (10.0,), "neg", 0), point("n1", (11.0,), "neg", 1)]
    # negs are the oldest: the newest half used for calibration has no neg
    train = build_dataset(examples[:6] + examples[8:] + examples[6:8])
    with pytest.raises(CalibrationError, match="neg"):
        InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.4).fit(
            build_dataset(
                [point("n0", (10.0,), "neg", 0), point("n1", (11.0,), "neg", 1)]
                + [point(f"p{i}", (float(i),), "pos", 2 + i) for i in range(8)]
            )
        )


def test_ice_calibration_pvalues_near_uniform():
    # conformal validity under exchangeability, desk-scale version: the
    # empirical CDF of credibility should track the uniform CDF both ways
    train = gaussian_dataset(300, {"neg": (0.0, 0.0), "pos": (6.0, 0.0)}, 0.5, seed=13)
    ev = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.5).fit(train)
    creds = np.array([r.credibility for r in ev.calibration_records_])
    for eps in (0.05, 0.1, 0.2, 0.5, 0.8):
        assert abs(np.mean(creds <= eps) - eps) <= 0.05


def test_record_invariants_property():
    train = gaussian_dataset(40, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.6, seed=3)
    ev = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.4).fit(train)
    for rec in ev.calibration_records_:
        assert rec.credibility == rec.pvals[rec.predicted]
        other = [v for lab, v in rec.pvals.items() if lab != rec.predicted]
        assert rec.confidence == 1.0 - max(other)
        assert all(0.0 <= v <= 1.0 for v in rec.pvals.values())
        # binary: credibility and 1-confidence are the two per-class p-values
        assert {rec.credibility, 1.0 - rec.confidence} == set(rec.pvals.values())


def test_monotone_transform_leaves_pvalues_bit_identical():
    train = gaussian_dataset(60, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.6, seed=5)
    base = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.5).fit(train)
    from driftguard.ncm import CentroidDistanceNcm

    warped = InductiveEvaluator(
        NearestCentroid(), MonotoneNcm(CentroidDistanceNcm(), math.exp),
        calibration_fraction=0.5,
    ).fit(train)
    for a, b in zip(base.calibration_records_, warped.calibration_records_):
        assert a.example_id == b.example_id
        assert a.pvals == b.pvals


# -- decisions ----------------------------------------------------------------------

def fitted_ice(seed=7):
    train = gaussian_dataset(60, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.5, seed=seed)
    return InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.5,
                              seed=seed).fit(train)


def test_decide_keeps_at_exact_threshold():
    ev = fitted_ice()
    z = None
    for x in np.linspace(3.0, 6.0, 301):
        cand = point("t", (float(x), 0.3), None, 999)
        d = ev.decide(cand)
        if d.predicted == "pos" and 0.0 < d.credibility < 1.0:
            z = cand
            break
    assert z is not None
    cred = ev.decide(z).credibility
    ev.thresholds_ = ThresholdSet(cred={"neg": 0.0, "pos": cred})
    d = ev.decide(z)
    assert d.credibility == cred
    assert d.kept  # the rule is >=, equality keeps
    ev.thresholds_ = ThresholdSet(cred={"neg": 0.0, "pos": float(np.nextafter(cred, 1.0))})
    assert not ev.decide(z).kept


def test_decide_rejects_drifted_point():
    ev = fitted_ice()
    ev.thresholds_ = ThresholdSet(cred={"neg": 0.1, "pos": 0.1})
    assert not ev.decide(point("t", (2.0, 30.0), None, 999)).kept


def test_decide_pool_count_scenario_five_of_seven():
    # seven-member predicted-class pool arranged so the test point beats two
    cal_pos = [point(f"cp{i}", (float(x),), "pos", 10 + i)
               for i, x in enumerate((0.0, 0.2, 0.4, 0.6, 0.8, 6.0, 7.0))]
    cal_neg = [point(f"cn{i}", (float(x),), "neg", 20 + i) for i, x in enumerate((29.0, 30.0, 31.0))]
    proper = [point("pp", (0.5,), "pos", 0), point("pn", (30.0,), "neg", 1)]
    train = build_dataset(proper + cal_pos + cal_neg)
    ev = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.8333).fit(train)
    # scan for a query whose credibility is exactly 5/7, then threshold below it
    target = None
    for x in np.linspace(0.0, 10.0, 2001):
        rec = ev.record_for(point("probe", (float(x),), None, 999))
        if rec.predicted == "pos" and rec.credibility == pytest.approx(5 / 7):
            target = float(x)
            break
    assert target is not None
    ev.thresholds_ = ThresholdSet(cred={"neg": 0.25, "pos": 0.25})
    d = ev.decide(point("probe", (target,), None, 999))
    assert d.credibility == pytest.approx(5 / 7)
    assert d.kept


def test_decide_requires_fit():
    ev = InductiveEvaluator(NearestCentroid(), "centroid")
    with pytest.raises(StateError):
        ev.decide(point("t", (0.0, 0.0), None, 0))


def test_decide_checks_dimensionality():
    ev = fitted_ice()
    from driftguard import DimensionError

    with pytest.raises(DimensionError):
        ev.decide(Example("t", {7: 1.0}, None, 0))


# -- cross-conformal evaluator ---------------------------------------------------------

def cce_spec(seed=123):
    return SearchSpec(positive_label="pos", max_iterations=400, no_update_stop=150, seed=seed)


def test_cce_is_two_ices_with_swapped_halves():
    train = gaussian_dataset(20, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.8, seed=17)
    cce = CrossConformalEvaluator(
        NearestCentroid(), "centroid", k=2, search=cce_spec(), seed=5
    ).fit(train)
    n = len(train)
    id_to_idx = {ex.id: i for i, ex in enumerate(train.examples)}
    for j, fold in enumerate(cce.folds_):
        fold_ids = sorted(
            {ex_id for lab in train.label_space for ex_id in fold.pools[lab].ids},
            key=lambda ex_id: id_to_idx[ex_id],
        )
        others = [ex for ex in train.examples if ex.id not in set(fold_ids)]
        members = [train.examples[id_to_idx[ex_id]] for ex_id in fold_ids]
        reordered = [
            Example(ex.id, ex.features, ex.label, ts)
            for ts, ex in enumerate(others + members)
        ]
        ice = InductiveEvaluator(
            NearestCentroid(), "centroid",
            calibration_fraction=len(members) / n,
            search=cce_spec(), seed=5,
        ).fit(build_dataset(reordered, label_space=train.label_space,
                            dimensionality=train.dimensionality))
        cce_records = {
            r.example_id: r for r in cce.calibration_records_ if r.example_id in set(fold_ids)
        }
        ice_records = {r.example_id: r for r in ice.calibration_records_}
        assert set(cce_records) == set(ice_records)
        for ex_id, rec in ice_records.items():
            other = cce_records[ex_id]
            assert rec.pvals == other.pvals
            assert rec.predicted == other.predicted
        assert fold.thresholds == ice.thresholds_


def test_cce_thresholds_not_aliased_across_folds():
    train = gaussian_dataset(30, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.8, seed=19)
    cce = CrossConformalEvaluator(
        NearestCentroid(), "centroid", k=3, search=cce_spec(), seed=5
    ).fit(train)
    assert len({id(f.thresholds) for f in cce.folds_}) == 3
    assert all(f.thresholds is not None for f in cce.folds_)


def test_cce_deterministic_under_seed():
    train = gaussian_dataset(24, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.8, seed=23)
    a = CrossConformalEvaluator(NearestCentroid(), "centroid", k=3, search=cce_spec(), seed=6).fit(train)
    b = CrossConformalEvaluator(NearestCentroid(), "centroid", k=3, search=cce_spec(), seed=6).fit(train)
    assert a.calibration_records_ == b.calibration_records_
    assert [f.thresholds for f in a.folds_] == [f.thresholds for f in b.folds_]


def test_cce_quorum_arithmetic():
    train = gaussian_dataset(80, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 1.5, seed=29)
    cce = CrossConformalEvaluator(
        NearestCentroid(), "centroid", k=10, search=cce_spec(), seed=6
    ).fit(train)
    # per-fold credibility thresholds that the folds straddle at mild drift
    thresholds = [fold.thresholds.cred["pos"] for fold in cce.folds_]
    assert len(set(thresholds)) > 1
    z = None
    for x in np.linspace(4.0, 14.0, 2001):
        d = cce.decide(point("t", (float(x), 0.8), None, 999))
        if 0 < d.fold_accepts < 10:
            z = point("t", (float(x), 0.8), None, 999)
            break
    assert z is not None, "expected a point accepted by some folds only"
    s = cce.decide(z).fold_accepts
    assert cce.with_quorum(s).decide(z).kept
    assert not cce.with_quorum(s + 1).decide(z).kept


def test_cce_majority_label_tie_breaks_by_label_order():
    train = gaussian_dataset(20, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 1.2, seed=31)
    cce = CrossConformalEvaluator(
        NearestCentroid(), "centroid", k=2, search=cce_spec(), seed=6
    ).fit(train)
    votes_split = None
    for x in np.linspace(0.5, 3.5, 1201):
        preds = set()
        for fold in cce.folds_:
            preds.add(fold.model.predict(point("t", (float(x), 0.0), None, 999)))
        if len(preds) == 2:
            votes_split = float(x)
            break
    assert votes_split is not None
    d = cce.decide(point("t", (votes_split, 0.0), None, 999))
    assert d.predicted == "neg"  # first label in label-space order wins the tie


def test_cce_quorum_bounds():
    train = gaussian_dataset(20, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.5, seed=37)
    with pytest.raises(ConfigurationError):
        CrossConformalEvaluator(NearestCentroid(), "centroid", k=3, quorum=4,
                                search=cce_spec(), seed=0).fit(train)


# -- alpha assessment -------------------------------------------------------------------

def test_alpha_assessment_all_correct_has_empty_incorrect_groups():
    ev = fitted_ice()
    records = [r for r in ev.calibration_records_ if r.predicted == r.ground_truth]
    table = alpha_assessment(records)
    for row in table.rows:
        if row.group == "incorrect":
            assert row.values == ()


def test_alpha_assessment_quartiles_match_sort_oracle():
    from driftguard import PValueRecord

    vals = [0.1, 0.9, 0.3, 0.7, 0.5]
    records = [
        PValueRecord(f"e{i}", "pos", "pos", {"pos": v, "neg": 0.0}, v, 1.0)
        for i, v in enumerate(vals)
    ]
    table = alpha_assessment(records)
    row = next(r for r in table.rows if r.label == "pos" and r.group == "correct")
    # sorted: .1 .3 .5 .7 .9 -> exact index hits
    assert (row.q1, row.median, row.q3) == (0.3, 0.5, 0.7)


def test_alpha_assessment_row_shape():
    ev = fitted_ice()
    table = alpha_assessment(ev.calibration_records_)
    assert len(table.rows) == len(ev.label_space_) * 2


def test_alpha_assessment_non_label_conditional_uses_all_classes():
    ev = fitted_ice()
    table = alpha_assessment(ev.calibration_records_, label_conditional=False)
    n_correct = sum(
        1 for r in ev.calibration_records_ if r.predicted == r.ground_truth
    )
    for row in table.rows:
        if row.group == "correct":
            assert len(row.values) == n_correct


def test_alpha_assessment_requires_ground_truth():
    from driftguard import PValueRecord

    rec = PValueRecord("e", "pos", None, {"pos": 0.5, "neg": 0.1}, 0.5, 0.9)
    with pytest.raises(DomainError):
        alpha_assessment([rec])


# -- serialization -----------------------------------------------------------------------

def test_state_round_trip_ice(tmp_path):
    ev = fitted_ice()
    path = tmp_path / "state.json"
    ev.save_state(path)
    restored = load_evaluator_state(path)
    for x in ((4.1, 0.0), (1.9, 0.4), (0.0, 9.0)):
        z = point("t", x, None, 999)
        assert restored.decide(z) == ev.decide(z)


def test_state_round_trip_tce(tmp_path):
    train = twelve_point_train()
    ev = TransductiveEvaluator(NearestCentroid(), "centroid", k=4, seed=4).fit(train)
    path = tmp_path / "state.json"
    ev.save_state(path)
    restored = load_evaluator_state(path)
    z = point("t", (1.5, 0.2), None, 999)
    assert restored.decide(z) == ev.decide(z)
    assert restored.kind == "approx-tce"


def test_state_round_trip_cce(tmp_path):
    train = gaussian_dataset(20, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.5, seed=41)
    ev = CrossConformalEvaluator(NearestCentroid(), "centroid", k=4,
                                 search=cce_spec(), seed=2).fit(train)
    path = tmp_path / "state.json"
    ev.save_state(path)
    restored = load_evaluator_state(path)
    for x in ((4.0, 0.0), (2.0, 1.0)):
        z = point("t", x, None, 999)
        assert restored.decide(z) == ev.decide(z)


def test_state_version_mismatch():
    ev = fitted_ice()
    state = ev.to_state()
    state["version"] = "driftguard-state/999"
    with pytest.raises(StateError, match="version"):
        evaluator_from_state(state)


def test_state_corrupt_file(tmp_path):
    path = tmp_path / "state.json"
    path.write_text("{not json")
    with pytest.raises(StateError):
        load_evaluator_state(path)


def test_saved_state_is_deterministic(tmp_path):
    train = gaussian_dataset(30, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.5, seed=43)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    for path in (pa, pb):
        InductiveEvaluator(
            NearestCentroid(), "centroid", calibration_fraction=0.4,
            search=SearchSpec(positive_label="pos", max_iterations=300,
                              no_update_stop=100, seed=11),
            seed=3,
        ).fit(train).save_state(path)
    assert pa.read_bytes() == pb.read_bytes()


# -- further evaluator/NCM combinations ----------------------------------------------------

def test_ice_shuffled_split_is_seeded_and_valid():
    train = gaussian_dataset(50, {"neg": (0.0, 0.0), "pos": (4.0, 0.0)}, 0.6, seed=47)
    a = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.4,
                           seed=3, shuffle=True).fit(train)
    b = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.4,
                           seed=3, shuffle=True).fit(train)
    c = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.4,
                           seed=4, shuffle=True).fit(train)
    assert a.calibration_records_ == b.calibration_records_
    assert {r.example_id for r in a.calibration_records_} != {
        r.example_id for r in c.calibration_records_
    }


def test_ice_with_signed_score_ncm():
    train = gaussian_dataset(60, {"neg": (-4.0, 0.0), "pos": (4.0, 0.0)}, 1.0, seed=51)
    ev = InductiveEvaluator(
        LinearSvm(epochs=10, seed=0), "signed-score", calibration_fraction=0.5
    ).fit(train)
    # a point far on the positive side conforms strongly to the pos pool
    deep = ev.record_for(point("t", (9.0, 0.0), None, 999))
    assert deep.predicted == "pos"
    assert deep.credibility == 1.0
    near = ev.record_for(point("t2", (0.3, 0.0), None, 999))
    assert near.credibility < 0.2  # boundary points are nonconforming


def test_ice_with_abs_margin_ncm_is_class_free():
    train = gaussian_dataset(60, {"neg": (-4.0, 0.0), "pos": (4.0, 0.0)}, 1.0, seed=53)
    ev = InductiveEvaluator(
        LinearSvm(epochs=10, seed=0), "abs-margin", calibration_fraction=0.5
    ).fit(train)
    rec = ev.record_for(point("t", (0.2, 0.0), None, 999))
    assert rec.credibility < 0.25
    far = ev.record_for(point("t2", (8.0, 0.0), None, 999))
    assert far.credibility == 1.0


def test_external_scores_with_ensemble_votes_end_to_end():
    from driftguard import EnsembleDisagreementNcm, ExternalScoresModel

    examples = []
    table = {}
    votes = {}
    # proper training slice (unused by the adapter beyond ids)
    for i in range(2):
        for lab in ("neg", "pos"):
            ex_id = f"tr-{lab}{i}"
            examples.append(point(ex_id, (float(i),), lab, len(examples)))
            table[ex_id] = {"pos": 1.0 if lab == "pos" else 0.0, "neg": 1.0 if lab == "neg" else 0.0}
            votes[ex_id] = (lab,) * 4
    # calibration members with graded ensemble disagreement
    fractions = {"c0": 0, "c1": 1, "c2": 2, "c3": 3}
    for name, wrong in fractions.items():
        for lab in ("neg", "pos"):
            ex_id = f"{name}-{lab}"
            examples.append(point(ex_id, (9.0,), lab, len(examples)))
            table[ex_id] = {"pos": 1.0 if lab == "pos" else 0.0, "neg": 1.0 if lab == "neg" else 0.0}
            other = "neg" if lab == "pos" else "pos"
            votes[ex_id] = (other,) * wrong + (lab,) * (4 - wrong)
    test_id = "t0"
    table[test_id] = {"pos": 1.0, "neg": 0.0}
    votes[test_id] = ("neg", "neg", "pos", "pos")  # disagreement 0.5 for pos
    train = build_dataset(examples, dimensionality=1)
    ev = InductiveEvaluator(
        ExternalScoresModel(table, ("neg", "pos")),
        EnsembleDisagreementNcm(votes),
        calibration_fraction=8 / 12,
    ).fit(train)
    rec = ev.record_for(point(test_id, (9.0,), None, 999))
    assert rec.predicted == "pos"
    # pos pool disagreements are {0, .25, .5, .75}; two entries >= 0.5
    assert rec.credibility == 0.5


def test_concurrent_decides_match_sequential():
    from concurrent.futures import ThreadPoolExecutor

    ev = fitted_ice()
    ev.thresholds_ = ThresholdSet(cred={"neg": 0.1, "pos": 0.1})
    queries = [point(f"t{i}", (float(x), 0.0), None, 999)
               for i, x in enumerate(np.linspace(-2, 8, 60))]
    sequential = [ev.decide(z) for z in queries]
    with ThreadPoolExecutor(max_workers=8) as pool:
        threaded = list(pool.map(ev.decide, queries))
    assert threaded == sequential


# -- drift sensitivity --------------------------------------------------------------------

def test_mean_credibility_of_drifting_class_decreases():
    from scipy.stats import spearmanr

    from driftguard import drift_config_from_dict, generate_drift_stream, temporal_split

    cfg = drift_config_from_dict(
        {
            "dimensionality": 2,
            "periods": 12,
            "examples_per_period": 120,
            "period_seconds": 100,
            "classes": [
                {"label": "neg",
                 "components": [{"mean": [0, 0], "variances": [0.2, 0.2], "weight": 1.0}]},
                {"label": "pos",
                 "components": [{"mean": [4, 0], "variances": [0.2, 0.2], "weight": 1.0}],
                 "shifts": [[0, 0], [0, 0]] + [[-0.3, 0.3]] * 10},
            ],
            "priors": [0.5, 0.5],
        }
    )
    stream = generate_drift_stream(cfg, seed=77)
    split = temporal_split(stream, train_end=199, period_length=100)
    ev = InductiveEvaluator(NearestCentroid(), "centroid", calibration_fraction=0.5).fit(split.train)
    means = []
    for period in split.test_periods:
        creds = [ev.decide(ex).credibility for ex in period if ex.label == "pos"]
        means.append(np.mean(creds))
    rho, pval = spearmanr(range(len(means)), means)
    assert rho < 0
    assert pval < 0.01
