import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringsnn.fabric import Direction, TopologyConfig, ring_distance
from ringsnn.packet import SyncClass, decode
from ringsnn.synapse_store import StoreError, SynapseList


def test_proximity_order_on_twenty_cores():
    topo = TopologyConfig(n_cores=20, core_capacity=4096)
    dst = [5 * 4096 + 1, 0 * 4096 + 9, 19 * 4096 + 3]
    s = SynapseList.build([0, 0, 0], dst, [1.0, 2.0, 3.0], [1, 1, 1], 20 * 4096, topo)
    cores = [p.dst // 4096 for p in s.fetch(0)[:-1]]
    assert cores == [0, 19, 5]
    assert list(s.route[:3]) == [Direction.LOCAL, Direction.LEFT, Direction.RIGHT]


def test_empty_store():
    topo = TopologyConfig(2, 8)
    s = SynapseList.build([], [], [], [], 16, topo)
    assert len(s) == 0
    for n in range(16):
        pkts = s.fetch(n)
        assert len(pkts) == 1 and pkts[0].sync == SyncClass.LOCAL_SYNC


def test_fetch_appends_local_sync():
    topo = TopologyConfig(2, 4)
    s = SynapseList.build([5, 5, 5, 1], [0, 6, 2, 3], [1.0, 2.0, 3.0, 4.0], [1, 2, 3, 4], 8, topo)
    pkts = s.fetch(5)
    assert [p.sync for p in pkts] == [SyncClass.DATA] * 3 + [SyncClass.LOCAL_SYNC]
    assert pkts[-1].origin == 1
    assert pkts[0].dst == 6  # own core first
    assert s.fanout(1) == 1 and s.fanout(0) == 0


def test_single_core_keeps_secondary_order():
    topo = TopologyConfig(1, 100)
    dst = [7, 3, 3, 9]
    s = SynapseList.build([2, 2, 2, 2], dst, [1.0, 2.0, 3.0, 4.0], [1] * 4, 100, topo)
    assert [p.dst for p in s.fetch(2)[:-1]] == [3, 3, 7, 9]
    assert [p.weight for p in s.fetch(2)[:2]] == [2.0, 3.0]


@pytest.mark.parametrize("delay", [0, 65, -1])
def test_bad_delay_rejected_with_index(delay):
    topo = TopologyConfig(1, 10)
    with pytest.raises(StoreError, match="edge 2"):
        SynapseList.build([0, 0, 0], [1, 2, 3], [1.0] * 3, [1, 1, delay], 10, topo)


def test_unknown_neuron_rejected():
    topo = TopologyConfig(1, 10)
    with pytest.raises(StoreError):
        SynapseList.build([0], [10], [1.0], [1], 10, topo)
    s = SynapseList.build([0], [1], [1.0], [1], 10, topo)
    with pytest.raises(StoreError):
        s.fetch(10)


def test_capacity_checked():
    with pytest.raises(StoreError):
        SynapseList.build([], [], [], [], 17, TopologyConfig(2, 8))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**31 - 1))
def test_runs_sorted_by_distance_and_complete(n_cores, seed):
    rng = np.random.default_rng(seed)
    cap = 16
    n = n_cores * cap
    m = 300
    src, dst = rng.integers(0, n, m), rng.integers(0, n, m)
    w, d = rng.normal(size=m), rng.integers(1, 65, m)
    topo = TopologyConfig(n_cores, cap)
    s = SynapseList.build(src, dst, w, d, n, topo)
    assert sorted(s.edge_id.tolist()) == list(range(m))
    for k in range(n):
        a, b = s.span(k)
        assert np.all(s.src[a:b] == k)
        dist = [min(ring_distance(k // cap, int(x) // cap, n_cores)) for x in dst[s.edge_id[a:b]]]
        assert dist == sorted(dist)
    # entries round-trip to the original edges
    for j in range(0, len(s), 17):
        p = decode(int(s.words[j]))
        e = s.edge_id[j]
        assert (p.dst, p.delay) == (dst[e], d[e])
        assert p.weight == np.float32(w[e])


def test_build_is_deterministic():
    rng = np.random.default_rng(0)
    args = (rng.integers(0, 64, 500), rng.integers(0, 64, 500), rng.normal(size=500), rng.integers(1, 65, 500))
    topo = TopologyConfig(4, 16)
    a = SynapseList.build(*args, 64, topo)
    b = SynapseList.build(*args, 64, topo)
    assert a.words.tobytes() == b.words.tobytes()
    assert a.offsets.tobytes() == b.offsets.tobytes()
