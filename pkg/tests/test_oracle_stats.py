import math

import numpy as np
import pytest

from conftest import chain_network, silent_network
from ringsnn import rng as crng
from ringsnn.neuron import spike_probability
from ringsnn.oracle import oracle_run
from ringsnn.recording import SpikeRecording
from ringsnn.simulator import RingSimulator
from ringsnn.stats import (StatsError, binned, compare, cv_isi, cv_isi_many, firing_rate,
                           network_groups, pearson, pearson_pairs)
from ringsnn.workloads.random_net import gen_random


def rec_of(pairs, total_steps, dt=0.1):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return SpikeRecording(pairs[:, 0], pairs[:, 1], {"dt": dt, "total_steps": total_steps})


def poisson_recording(n_neurons, rate_hz, n_steps, seed=0):
    p = float(spike_probability(rate_hz, 0.1))
    steps, neurons = [], []
    for k in range(n_neurons):
        hit = np.flatnonzero(crng.uniform(seed, k, np.arange(n_steps)) < p)
        steps.append(hit)
        neurons.append(np.full(len(hit), k))
    steps, neurons = np.concatenate(steps), np.concatenate(neurons)
    order = np.lexsort((neurons, steps))
    return SpikeRecording(steps[order], neurons[order], {"dt": 0.1, "total_steps": n_steps})


def test_oracle_zero_drive():
    rec = oracle_run(silent_network(), n_steps=300)
    assert len(rec) == 0 and rec.total_steps == 300


def test_oracle_chain_matches_ring():
    net = chain_network()
    assert oracle_run(net, n_steps=300) == RingSimulator(net).run(n_steps=300)[0]


def test_oracle_equals_canonical_ring_1024():
    net = gen_random(1024, seed=11)
    ring, _ = RingSimulator(net, seed=3, canonical=True).run(n_steps=1000)
    orc = oracle_run(net, seed=3, n_steps=1000)
    assert len(orc) > 0
    assert orc == ring


def test_rate_examples():
    assert firing_rate(rec_of([], 10000), [0], 1000.0)[0] == 0.0
    rec = rec_of([(k * 1000, 0) for k in range(10)], 10000)
    assert firing_rate(rec, [0, 1], 1000.0).tolist() == [10.0, 0.0]
    with pytest.raises(StatsError):
        firing_rate(rec, [0], 0.0)


def test_poisson_rate_band():
    rec = poisson_recording(1, 200.0, 100_000)
    rate = firing_rate(rec, [0], 10_000.0)[0]
    assert abs(rate - 200.0) <= 3 * math.sqrt(200.0 / 10.0)


def test_cv_examples():
    periodic = rec_of([(k * 50, 0) for k in range(20)], 1000)
    assert cv_isi(periodic, 0) == 0.0
    assert math.isnan(cv_isi(rec_of([(1, 0), (5, 0)], 10), 0))
    rec = poisson_recording(1, 200.0, 500_000)
    assert abs(cv_isi(rec, 0) - 1.0) < 0.05
    assert cv_isi_many(rec, [0])[0] == cv_isi(rec, 0)


def test_pearson_examples():
    x = np.array([0, 1, 3, 0, 2.0])
    assert pearson(x, x) == pytest.approx(1.0)
    alt = np.tile([1.0, 0.0], 10)
    assert pearson(alt, np.roll(alt, 1)) == pytest.approx(-1.0)
    assert math.isnan(pearson(np.ones(5), x))


def test_pearson_pairs_shifted_period_two():
    # neuron 0 fires in even bins, neuron 1 in odd bins (one bin = 20 steps)
    spikes = [(b * 20, b % 2) for b in range(50)]
    res = pearson_pairs(rec_of(sorted(spikes), 1000), [0, 1], bin_ms=2.0, n_pairs=5)
    assert np.allclose(res.r, -1.0) and res.skipped == 0


def test_zero_variance_pairs_skipped():
    rec = rec_of([(k * 20, 0) for k in range(50)], 1000)
    res = pearson_pairs(rec, [0, 1], n_pairs=10)
    assert len(res.r) == 0 and res.skipped == 10


def test_independent_trains_uncorrelated():
    rec = poisson_recording(100, 50.0, 20_000, seed=2)
    res = pearson_pairs(rec, np.arange(100), n_pairs=1000)
    assert abs(res.r.mean()) < 0.02


def test_binned_counts():
    rec = rec_of([(0, 0), (19, 0), (20, 1), (39, 0)], 40)
    assert binned(rec, [0, 1], 2.0).tolist() == [[2.0, 1.0], [0.0, 1.0]]
    with pytest.raises(StatsError):
        binned(rec, [0], 0.15)


def test_compare_self_is_zero(tmp_path):
    net = gen_random(256, seed=1, core_capacity=64, n_cores=4)
    rec = oracle_run(net, seed=0, n_steps=2000)
    rep = compare(rec, rec, network_groups(net))
    assert rep.exact_match
    for p in rep.populations:
        assert p.rate_rel_diff == 0 and p.cv_median_diff == 0 and p.pearson_mean_diff == 0
    paths = rep.write(tmp_path)
    assert "exact_match=1" in paths["kv"].read_text()


def test_compare_rejects_mismatch():
    a = rec_of([], 100)
    b = rec_of([], 200)
    with pytest.raises(StatsError):
        compare(a, b, [("x", np.arange(2))])
    a.meta["network"], b.meta["network"], b.meta["total_steps"] = "aa", "bb", 100
    with pytest.raises(StatsError):
        compare(a, b, [("x", np.arange(2))])


def test_compare_detects_difference():
    a = rec_of([(k * 100, 0) for k in range(10)], 1000)
    b = rec_of([(k * 50, 0) for k in range(20)], 1000)
    rep = compare(a, b, [("x", np.array([0]))])
    assert not rep.exact_match
    assert rep.populations[0].rate_rel_diff == pytest.approx(0.5)
