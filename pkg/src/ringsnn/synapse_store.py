"""Flattened, proximity-sorted outgoing synapse lists."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fabric import Direction, TAG_SHIFT, TopologyConfig, make_bursts, min_ring_distance, route_directions
from .network import MAX_DELAY, Network
from .packet import BURST_SIZE, SyncClass, SynapsePacket, decode, encode_words


class StoreError(ValueError):
    pass


@dataclass
class SynapseList:
    """Per-source contiguous runs of encoded packets.

    ``edge_id`` maps each stored entry back to its index in the input edge
    array; ``offsets[n]:offsets[n + 1]`` is neuron ``n``'s run.
    """

    topo: TopologyConfig
    n_neurons: int
    offsets: np.ndarray
    words: np.ndarray
    src: np.ndarray
    edge_id: np.ndarray
    route: np.ndarray
    distance: np.ndarray

    @classmethod
    def build(cls, src, dst, weight, delay, n_neurons: int, topo: TopologyConfig) -> "SynapseList":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        delay = np.asarray(delay, dtype=np.int64)
        bad = np.flatnonzero((delay < 1) | (delay > MAX_DELAY))
        if bad.size:
            raise StoreError(f"edge {bad[0]}: delay {delay[bad[0]]} outside [1, {MAX_DELAY}]")
        bad = np.flatnonzero((dst < 0) | (dst >= n_neurons) | (src < 0) | (src >= n_neurons))
        if bad.size:
            raise StoreError(f"edge {bad[0]}: neuron ID outside [0, {n_neurons})")
        if n_neurons > topo.total_capacity:
            raise StoreError(f"{n_neurons} neurons exceed {topo.n_cores} x {topo.core_capacity} capacity")
        src_core = src // topo.core_capacity
        dst_core = dst // topo.core_capacity
        dist = min_ring_distance(src_core, dst_core, topo.n_cores)
        order = np.lexsort((np.arange(len(src)), dst, dist, src))
        offsets = np.zeros(n_neurons + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n_neurons), out=offsets[1:])
        words = encode_words(np.asarray(weight, dtype=np.float32)[order], dst[order], delay[order])
        return cls(topo, n_neurons, offsets, words, src[order], order.astype(np.int64),
                   route_directions(src_core[order], dst_core[order], topo.n_cores),
                   dist[order])

    @classmethod
    def from_network(cls, net: Network, topo: TopologyConfig) -> "SynapseList":
        return cls.build(net.src, net.dst, net.weight, net.delay, net.n_neurons, topo)

    def __len__(self) -> int:
        return len(self.words)

    def span(self, neuron: int) -> tuple[int, int]:
        if not 0 <= neuron < self.n_neurons:
            raise StoreError(f"unknown source neuron {neuron}")
        return int(self.offsets[neuron]), int(self.offsets[neuron + 1])

    def fanout(self, neuron: int) -> int:
        a, b = self.span(neuron)
        return b - a

    def fetch(self, neuron: int) -> list[SynapsePacket]:
        a, b = self.span(neuron)
        core = neuron // self.topo.core_capacity
        out = [decode(int(w)) for w in self.words[a:b]]
        out.append(SynapsePacket.token(SyncClass.LOCAL_SYNC, core))
        return out

    def fabric_items(self) -> list[int]:
        """Wire words with the store position attached as side band."""
        return [w | (i << TAG_SHIFT) for i, w in enumerate(self.words.tolist())]

    def dispatch_tables(self, neurons, width: int = BURST_SIZE) -> dict[int, tuple[tuple, list, list]]:
        """Per source: local packets, then right and left bursts, in stored order."""
        items = self.fabric_items()
        route = self.route.tolist()
        tables = {}
        for n in neurons:
            a, b = self.span(int(n))
            loc, right, left = [], [], []
            for k in range(a, b):
                r = route[k]
                (loc if r == Direction.LOCAL else right if r == Direction.RIGHT else left).append(items[k])
            tables[int(n)] = (tuple(loc), make_bursts(right, width), make_bursts(left, width))
        return tables
