"""The sequential Hoeffding tree agrees with a straight-line reference tree."""

import math

import numpy as np
import pytest

from streamforge.generators import RandomTreeConfig, RandomTreeGenerator
from streamforge.vht.hoeffding import HoeffdingTree, VhtConfig
from streamforge.vht.tree import Outcome

from .oracles import OracleHoeffdingTree


def _compare(n, seed, n_categorical=10, n_numeric=10):
    gen = RandomTreeGenerator(RandomTreeConfig(n_categorical=n_categorical, n_numeric=n_numeric, seed=seed))
    schema = gen.schema()
    tree = HoeffdingTree(schema, VhtConfig())
    oracle = OracleHoeffdingTree([len(a.values) if a.values else 0 for a in schema.attributes], schema.n_classes)
    mismatches = 0
    for _ in range(n):
        inst = gen.next()
        x = inst.dense()
        xs = x.tolist()
        if tree.predict_learn(x, inst.label) != oracle.predict(xs):
            mismatches += 1
        oracle.learn(xs, inst.label)
    return tree, oracle, mismatches


def test_split_sequence_and_predictions_match_oracle():
    tree, oracle, mismatches = _compare(100_000, seed=3)
    ours = [(a, t) for _, a, t in tree.tree.splits]
    assert len(ours) == len(oracle.splits) > 0
    for (a, t), (oa, ot) in zip(ours, oracle.splits):
        assert a == oa
        assert (t is None and ot is None) or math.isclose(t, ot, rel_tol=1e-9, abs_tol=1e-12)
    assert mismatches == 0


@pytest.mark.parametrize("seed", [0, 1])
def test_numeric_only_stream_matches_oracle(seed):
    tree, oracle, mismatches = _compare(20_000, seed=seed, n_categorical=0, n_numeric=5)
    assert [a for _, a, _ in tree.tree.splits] == [a for a, _ in oracle.splits]
    assert mismatches == 0


def test_split_decisions_follow_the_bound():
    tree, _, _ = _compare(30_000, seed=5)
    for d in tree.history.decisions:
        if d.outcome is Outcome.SPLIT:
            assert d.delta_g > d.epsilon or d.epsilon < tree.config.tau
        elif d.outcome is Outcome.NO_SPLIT:
            assert d.delta_g <= d.epsilon and d.epsilon >= tree.config.tau
