import numpy as np
import pytest

from streamforge.generators import (
    RandomTreeConfig,
    RandomTreeGenerator,
    RandomTweetGenerator,
    TweetConfig,
    WaveformConfig,
    WaveformGenerator,
    waveform_bases,
    zipf_pmf,
)
from streamforge.instances import take, validate


@pytest.mark.parametrize(
    "make",
    [
        lambda s: RandomTreeGenerator(RandomTreeConfig(n_categorical=4, n_numeric=3, n_values=3, seed=s)),
        lambda s: RandomTweetGenerator(TweetConfig(vocabulary=50, seed=s)),
        lambda s: WaveformGenerator(WaveformConfig(seed=s)),
        lambda s: WaveformGenerator(WaveformConfig(seed=s, regression=True, noise_attributes=0)),
    ],
)
def test_streams_are_seeded_restartable_and_valid(make):
    a, b, c = make(4), make(4), make(5)
    first = list(take(a, 300))
    assert first == list(take(b, 300))
    assert first != list(take(c, 300))
    a.restart()
    assert list(take(a, 300)) == first
    schema = a.schema()
    for inst in first:
        validate(inst, schema)


def test_random_tree_is_balanced_and_consistent():
    for seed in range(5):
        gen = RandomTreeGenerator(RandomTreeConfig(seed=seed))
        assert gen.concept.class_mass() == pytest.approx([0.5, 0.5])
        x, y = gen.sample(40_000)
        assert abs(y.mean() - 0.5) < 0.02
        assert np.array_equal(gen.concept.classify(x), y)
    gen = RandomTreeGenerator(RandomTreeConfig(n_categorical=100, n_numeric=100))
    assert gen.schema().n_attributes == 200
    assert gen.schema().categorical_mask.sum() == 100


def test_tweets_are_sparse_binary_and_class_dependent():
    gen = RandomTweetGenerator(TweetConfig(vocabulary=100, seed=1))
    insts = list(take(gen, 2000))
    assert all(i.is_sparse and np.all(i.values == 1.0) for i in insts)
    top = {0: np.zeros(100), 1: np.zeros(100)}
    for i in insts:
        top[i.label][i.indices] += 1
    assert top[0].argmax() == 0 and top[1].argmax() == 99


def test_zipf_pmf():
    p = zipf_pmf(1000, 1.5)
    assert p.sum() == pytest.approx(1.0)
    assert p[0] / p[1] == pytest.approx(2**1.5)
    with pytest.raises(ValueError):
        TweetConfig(zipf_skew=1.0)


def test_tweet_sample_statistics_small():
    labels, lengths, ranks = RandomTweetGenerator(TweetConfig(seed=3)).sample(50_000)
    assert abs(lengths.mean() - 15) < 0.05
    assert ranks.min() >= 1 and ranks.max() <= 1000
    assert abs(labels.mean() - 0.5) < 0.01


def test_waveform_construction():
    bases = waveform_bases()
    assert bases.shape == (3, 21)
    assert [int(b.argmax()) + 1 for b in bases] == [11, 15, 7] and bases.max() == 6
    x, y = WaveformGenerator(WaveformConfig(seed=2)).sample(30_000)
    assert x.shape == (30_000, 40)
    assert np.abs(np.bincount(y) / 30_000 - 1 / 3).max() < 0.01
    assert abs(x[:, 21:].std() - 1) < 0.02 and abs(x[:, 21:].mean()) < 0.02
    reg = WaveformGenerator(WaveformConfig(regression=True))
    assert not reg.schema().is_classification
    assert reg.schema().target.range == 2.0
    with pytest.raises(ValueError):
        WaveformConfig(base_attributes=10)
