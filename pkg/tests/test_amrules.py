import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamforge.amrules.rules import (
    AmrConfig,
    AnomalyStats,
    ExpansionStats,
    Feature,
    Head,
    PageHinkley,
    Rule,
    RuleSet,
    Welford,
    sdr,
)
from streamforge.amrules.sequential import AMRules
from streamforge.generators import WaveformConfig, WaveformGenerator
from streamforge.instances import AttributeSpec, ClassTarget, InstanceSchema, NumericTarget

from .conftest import prequential
from .oracles import sdr_raw

WAVE = "WaveformGenerator -t numeric -r 1"


def _schema(m=2, categorical=0):
    attrs = [AttributeSpec.categorical(f"c{i}", "abc") for i in range(categorical)]
    attrs += [AttributeSpec(f"n{i}") for i in range(m)]
    return InstanceSchema(tuple(attrs), NumericTarget("y", 0.0, 10.0))


def _moments(values):
    return (float(len(values)), float(sum(values)), float(sum(v * v for v in values)))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=12), st.integers(1, 11))
def test_sdr_matches_raw_values(values, cut):
    cut = min(cut, len(values) - 1)
    left, right = values[:cut], values[cut:]
    got = sdr(_moments(values), [_moments(left), _moments(right)])
    assert got == pytest.approx(sdr_raw(values, [left, right]), abs=1e-6)


def test_sdr_rejects_degenerate_input():
    with pytest.raises(ValueError):
        sdr((1, 1.0, 1.0), [(1, 1.0, 1.0)])
    with pytest.raises(ValueError):
        sdr((2, 1.0, 1.0), [(2, 1.0, 1.0), (0, 0.0, 0.0)])


def test_feature_coverage_and_validation():
    x = np.array([1.0, 5.0])
    assert Feature(0, "<", 2.0).covers(x) and not Feature(0, ">=", 2.0).covers(x)
    assert Feature(1, "=", 5.0).covers(x)
    with pytest.raises(ValueError):
        Feature(0, ">", 1.0)
    with pytest.raises(ValueError):
        Feature(0, "<", math.inf)


def test_ruleset_stacked_coverage_matches_rule_by_rule():
    schema = _schema(2, categorical=1)
    cfg = AmrConfig()
    rs = RuleSet(Rule(-1, schema, cfg))
    bodies = [[Feature(1, "<", 0.5)], [Feature(1, ">=", 0.2), Feature(2, "<", 0.7)], [Feature(0, "=", 1.0)], []]
    for i, body in enumerate(bodies):
        r = Rule(i, schema, cfg)
        for f in body:
            r.add_feature(f)
        rs.add(r)
    rng = np.random.default_rng(0)
    for _ in range(500):
        x = np.array([float(rng.integers(3)), rng.random(), rng.random()])
        if rng.random() < 0.1:
            x[1] = np.nan
        assert [r.id for r in rs.covering(x)] == [r.id for r in rs.rules if r.covers(x)]
    assert rs.remove(1).id == 1 and rs.ids() == [0, 2, 3] and rs.remove(9) is None
    with pytest.raises(ValueError):
        Rule(9, schema, cfg).add_feature(Feature(1, "=", 1.0))


def test_page_hinkley_detects_shift_and_stays_quiet():
    rng = np.random.default_rng(7)
    ph = PageHinkley()
    stationary = np.abs(rng.normal(0, 0.1, 20_000))
    assert not any(ph.update(e) for e in stationary)
    shift = 5 * stationary.std()
    fired = next(i for i in range(2000) if ph.update(abs(rng.normal(0, 0.1)) + shift))
    assert fired < 500
    ph.reset()
    assert ph.n == 0 and ph.m == 0.0
    with pytest.raises(ValueError):
        ph.update(-1.0)


@given(st.lists(st.lists(st.floats(-100, 100), min_size=3, max_size=3), min_size=2, max_size=40))
def test_welford_matches_numpy(rows):
    w = Welford(3)
    for r in rows:
        w.update(np.array(r))
    data = np.array(rows)
    np.testing.assert_allclose(w.mean, data.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(w.sd(), data.std(axis=0, ddof=1), atol=1e-7)


def test_anomaly_flags_far_outliers_only():
    schema = _schema(3)
    stats = AnomalyStats(schema)
    rng = np.random.default_rng(1)
    for _ in range(200):
        stats.update(rng.normal(size=3))
    assert not stats.is_anomaly(np.zeros(3), 1e-4, 30)
    assert stats.is_anomaly(np.full(3, 12.0), 1e-4, 30)
    assert not AnomalyStats(schema).is_anomaly(np.full(3, 12.0), 1e-4, 30)


def test_head_learns_linear_target():
    head = Head(2)
    rng = np.random.default_rng(2)
    for _ in range(5000):
        x = rng.normal(size=2)
        head.update(x, 3.0 * x[0] - x[1] + 1.0)
    x = np.array([0.5, -0.5])
    assert head.predict(x) == pytest.approx(3.0, abs=0.2)
    assert head.err_lms < head.err_mean


def test_expansion_finds_step_function():
    schema = _schema(2)
    stats = ExpansionStats(schema, grace_period=100)
    rng = np.random.default_rng(3)
    for _ in range(400):
        x = rng.random(2)
        stats.update(x, 8.0 if x[1] >= 0.5 else 1.0)
    exp = stats.try_expand(1e-7, 0.05)
    assert exp is not None and exp.feature.attribute == 1
    assert 0.35 < exp.feature.value < 0.65
    assert exp.branch[0] + exp.complement[0] == 400


def test_sequential_rules_learn_and_log():
    gen = WaveformGenerator(WaveformConfig(seed=1, regression=True))
    model = AMRules(gen.schema(), AmrConfig())
    errors = []
    for _ in range(30_000):
        inst = gen.next()
        x = inst.dense()
        errors.append(abs(model.predict_learn(x, float(inst.label)) - inst.label))
    assert len(model.ruleset) > 0
    creates = [e for e in model.log if e[0] == "create"]
    assert [e[1] for e in creates] == list(range(len(creates)))
    assert np.mean(errors[-5000:]) < np.mean(errors[:5000]) - 0.03
    assert set(model.bodies()) == set(model.ruleset.ids())


def test_rules_reject_classification_schema():
    schema = InstanceSchema((AttributeSpec("a"),), ClassTarget("y", ("p", "q")))
    with pytest.raises(ValueError):
        AMRules(schema)


@pytest.mark.parametrize("p", [1, 3])
def test_vertical_rules_match_sequential(p):
    local = prequential("AMRulesLocal", WAVE, 10_000)
    dist = prequential(f"VAMR -p {p}", WAVE, 10_000)
    seq_log = local.report.instance("local-rules").model.log
    ma = dist.report.instance("model-aggregator")
    assert seq_log and ma.log == seq_log
    assert ma.late_verdicts == 0 and not ma.pending


def test_ordered_vertical_rules_match_sequential():
    local = prequential("AMRulesLocal -ordered true", WAVE, 8_000)
    dist = prequential("VAMR -p 2 -ordered true", WAVE, 8_000)
    assert dist.report.instance("model-aggregator").log == local.report.instance("local-rules").model.log


@pytest.mark.parametrize("r", [1, 3])
def test_hybrid_aggregators_converge(r):
    run = prequential(f"HAMR -p 2 -r {r}", WAVE, 10_000)
    mas = run.report.instances("model-aggregator")
    ids = [ma.rule_ids() for ma in mas]
    assert ids[0] and all(i == ids[0] for i in ids)
    seen = [ma.instances_seen for ma in mas]
    assert sum(seen) == 10_000 and max(seen) - min(seen) <= 1
    assert run.final.instances == 10_000


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 120))
def test_candidate_sides_sum_to_parent(seed, n):
    schema = _schema(2, categorical=1)
    stats = ExpansionStats(schema, grace_period=10)
    rng = np.random.default_rng(seed)
    for _ in range(n):
        x = np.array([float(rng.integers(3)), rng.normal(), rng.random()])
        stats.update(x, float(rng.normal()))
    parent = np.array([stats.n, stats.sum, stats.sumsq])
    for _, feat, side, other in stats.candidates():
        np.testing.assert_allclose(np.add(side, other), parent, rtol=1e-9, atol=1e-9)


def _rules_run(ordered, n=20_000):
    gen = WaveformGenerator(WaveformConfig(seed=4, regression=True))
    model = AMRules(gen.schema(), AmrConfig(ordered=ordered, grace_period=100, ph_lambda=5.0))
    touched = []
    for _ in range(n):
        inst = gen.next()
        x = inst.dense()
        before = {r.id: r.head.y_n for r in model.ruleset.rules}
        cover = [r.id for r in model.ruleset.covering(x)]
        model.learn(x, float(inst.label))
        after = {r.id: r.head.y_n for r in model.ruleset.rules}
        touched.append((len(cover), sum(after.get(i, 0) != before[i] for i in before)))
    return model, touched


def test_ordered_mode_trains_one_rule_and_ids_increase():
    model, touched = _rules_run(True)
    assert any(c > 1 for c, _ in touched)
    assert all(t <= 1 for _, t in touched)
    created = [e[1] for e in model.log if e[0] == "create"]
    assert created == sorted(created) and len(set(created)) == len(created)
    assert model.ruleset.ids() == sorted(model.ruleset.ids())


def test_unordered_mode_trains_every_covering_rule():
    model, touched = _rules_run(False, 10_000)
    multi = [(c, t) for c, t in touched if c > 1]
    assert multi and sum(t for _, t in multi) > sum(1 for _ in multi)


def test_eviction_keeps_remaining_order():
    model, _ = _rules_run(False)
    evicted = [e[1] for e in model.log if e[0] == "evict"]
    created = [e[1] for e in model.log if e[0] == "create"]
    assert evicted
    assert model.ruleset.ids() == [i for i in created if i not in evicted]
