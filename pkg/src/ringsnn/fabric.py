"""Ring fabric: topology, routing decisions, the per-core router, and the
delay accumulator.

Channels carry bursts: ``(hops, items)`` where ``items`` is a tuple of up
to ``link_width`` packets from one source neuron, all travelling the same
way. A packet is a Python int whose low 64 bits are the wire word; the bits
above carry the position of the originating synapse in the store, used only
for canonical summation. Because synapse lists are sorted by ring distance,
the packets a core must keep always form a prefix of an arriving burst.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .packet import (BURST_SIZE, DST_MASK, SyncClass, SynapsePacket, decode_words, encode,
                     WORD_MASK)

N_SLOTS = 64
TAG_SHIFT = 64
DEFAULT_QUEUE_CAPACITY = 1024

_DATA = int(SyncClass.DATA)
_LOCAL = int(SyncClass.LOCAL_SYNC)
_GLOBAL = int(SyncClass.GLOBAL_SYNC)
_DST_FIELD = DST_MASK << 8


class FabricFault(RuntimeError):
    pass


class DeadlockError(FabricFault):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class Direction(IntEnum):
    LOCAL = 0
    LEFT = 1
    RIGHT = 2


@dataclass(frozen=True)
class TopologyConfig:
    n_cores: int = 1
    core_capacity: int = 4096
    device_boundaries: frozenset = field(default_factory=frozenset)
    dt: float = 0.1

    def __post_init__(self):
        if self.n_cores < 1 or self.core_capacity < 1:
            raise ValueError("need at least one core with capacity >= 1")
        object.__setattr__(self, "device_boundaries", frozenset(self.device_boundaries))
        bad = [b for b in self.device_boundaries if not 0 <= b < self.n_cores]
        if bad:
            raise ValueError(f"device boundary links out of range: {bad}")

    @property
    def total_capacity(self) -> int:
        return self.n_cores * self.core_capacity

    def core_of(self, neuron):
        return neuron // self.core_capacity

    def core_range(self, core: int) -> tuple[int, int]:
        return core * self.core_capacity, (core + 1) * self.core_capacity


def ring_distance(src_core: int, dst_core: int, n_cores: int) -> tuple[int, int]:
    """Hops needed going (left, right)."""
    return (src_core - dst_core) % n_cores, (dst_core - src_core) % n_cores


def route_direction(src_core: int, dst_core: int, n_cores: int) -> Direction:
    if src_core == dst_core:
        return Direction.LOCAL
    left, right = ring_distance(src_core, dst_core, n_cores)
    return Direction.LEFT if left < right else Direction.RIGHT


def route_directions(src_core, dst_core, n_cores: int) -> np.ndarray:
    src_core = np.asarray(src_core, dtype=np.int64)
    dst_core = np.asarray(dst_core, dtype=np.int64)
    left = (src_core - dst_core) % n_cores
    right = (dst_core - src_core) % n_cores
    out = np.where(left < right, int(Direction.LEFT), int(Direction.RIGHT))
    return np.where(src_core == dst_core, int(Direction.LOCAL), out).astype(np.int8)


def min_ring_distance(src_core, dst_core, n_cores: int) -> np.ndarray:
    src_core = np.asarray(src_core, dtype=np.int64)
    dst_core = np.asarray(dst_core, dtype=np.int64)
    return np.minimum((src_core - dst_core) % n_cores, (dst_core - src_core) % n_cores)


class Channel(deque):
    """Bounded FIFO between two neighbouring routers (one direction).

    Single producer, single consumer; the producer checks ``has_room`` before
    appending, so capacity is never exceeded.
    """

    def __init__(self, capacity: int = DEFAULT_QUEUE_CAPACITY, name: str = ""):
        super().__init__()
        self.capacity = capacity
        self.name = name


class DelayAccumulator:
    """Per-core circular buffer of N_SLOTS weight slots for every local neuron."""

    def __init__(self, n_local: int, base: int = 0):
        self.n_local = n_local
        self.base = base
        self.slots = np.zeros((N_SLOTS, n_local), dtype=np.float64)
        self._flat = self.slots.reshape(-1)
        self._released: int | None = None
        self.injected = 0.0
        self.released_total = 0.0

    def _check(self, local, delay):
        if np.any((delay < 1) | (delay > N_SLOTS)):
            raise FabricFault(f"delay outside [1, {N_SLOTS}] reached the accumulator")
        if np.any((local < 0) | (local >= self.n_local)):
            raise FabricFault("packet delivered to a core that does not own its destination")

    def accumulate(self, pkt: SynapsePacket, t: int) -> None:
        local = pkt.dst - self.base
        self._check(np.array([local]), np.array([pkt.delay]))
        w = float(np.float32(pkt.weight))
        self.slots[(t + pkt.delay) % N_SLOTS, local] += w
        self.injected += w

    def accumulate_words(self, words: np.ndarray, t: int, order: np.ndarray | None = None) -> int:
        """Add a batch of DATA words in the given order (default: array order)."""
        if order is not None:
            words = words[order]
        weight, sync, dst, delay = decode_words(words)
        if np.any(sync != _DATA):
            raise FabricFault("non-DATA packet delivered to the accumulator")
        return self.accumulate_fields(dst.astype(np.int64), delay.astype(np.int64),
                                      weight.astype(np.float64), t)

    def accumulate_fields(self, dst: np.ndarray, delay: np.ndarray, weight: np.ndarray, t: int) -> int:
        """Add already decoded DATA packets, in array order."""
        local = dst - self.base
        self._check(local, delay)
        idx = ((t + delay) % N_SLOTS) * self.n_local + local
        np.add.at(self._flat, idx, weight)
        self.injected += float(weight.sum())
        return len(dst)

    def release(self, t: int) -> np.ndarray:
        """Return and clear the slot scheduled for step ``t``."""
        if self._released is not None and t <= self._released:
            raise FabricFault(f"slot for step {t} released twice")
        self._released = t
        s = t % N_SLOTS
        out = self.slots[s].copy()
        self.slots[s] = 0.0
        self.released_total += float(out.sum())
        return out

    def pending_total(self) -> float:
        return float(self.slots.sum())


@dataclass
class RouterMetrics:
    data_hops_right: int = 0
    data_hops_left: int = 0
    token_hops: int = 0
    stalls: int = 0
    high_water: int = 0
    local_syncs: int = 0
    delivered_remote: int = 0
    delivered_local: int = 0
    max_hops: int = 0


class Router:
    """Arbitration for one core.

    ``in_r`` carries rightward-travelling bursts arriving from the left
    neighbour, ``in_l`` leftward-travelling ones from the right neighbour.
    Per outbound link and micro-step at most one burst moves, and a
    neighbour burst always goes before local injection. Local injection
    needs two free entries so the ring never fills completely.
    """

    def __init__(self, core_id: int, topo: TopologyConfig, in_r: Channel, out_r: Channel,
                 in_l: Channel, out_l: Channel, local_capacity: int = DEFAULT_QUEUE_CAPACITY):
        self.core_id = core_id
        # destination IDs owned by this core, compared on the shifted dst field
        self.dst_lo = (core_id * topo.core_capacity) << 8
        self.dst_hi = ((core_id + 1) * topo.core_capacity) << 8
        self.n_cores = topo.n_cores
        self.capacity = topo.core_capacity
        self.in_r, self.out_r, self.in_l, self.out_l = in_r, out_r, in_l, out_l
        self.loc_r: deque = deque()
        self.loc_l: deque = deque()
        self.local_capacity = local_capacity
        self.delivered: list = []
        self.tokens_r = 0
        self.tokens_l = 0
        self.acks_r = 0
        self.acks_l = 0
        self.metrics = RouterMetrics()

    def reset_step(self):
        self.tokens_r = 0
        self.tokens_l = 0
        self.reset_acks()

    def reset_acks(self):
        self.acks_r = 0
        self.acks_l = 0

    @property
    def sync_acks(self) -> int:
        return self.acks_r + self.acks_l

    @property
    def lists_acked(self) -> int:
        """Synapse lists whose LOCAL_SYNC has reached the head of both lanes."""
        return min(self.acks_r, self.acks_l)

    @property
    def barrier_done(self) -> bool:
        return self.tokens_r == self.n_cores and self.tokens_l == self.n_cores

    def _lane(self, inbound: Channel, outbound: Channel, local: deque, rightward: bool) -> bool:
        progress = False
        link_free = True
        moved = 0
        cap = outbound.capacity
        lo, hi = self.dst_lo, self.dst_hi
        # neighbour traffic first
        while inbound:
            hops, items = inbound[0]
            head = items[0]
            sync = (head >> 30) & 3
            if sync == _DATA:
                n = len(items)
                k = 0
                while k < n and lo <= (items[k] & _DST_FIELD) < hi:
                    k += 1
                if k == n:
                    self.delivered.append(inbound.popleft())
                    progress = True
                    continue
                if len(outbound) >= cap:
                    self.metrics.stalls += 1
                    link_free = False
                    break
                inbound.popleft()
                if k:
                    self.delivered.append((hops, items[:k]))
                    items = items[k:]
                outbound.append((hops + 1, items))
                moved = n - k
            elif sync == _GLOBAL:
                if (head >> 8) & DST_MASK == self.core_id:
                    inbound.popleft()
                    self._count_token(rightward)
                    progress = True
                    continue
                if len(outbound) >= cap:
                    self.metrics.stalls += 1
                    link_free = False
                    break
                self._count_token(rightward)
                outbound.append(inbound.popleft())
                self.metrics.token_hops += 1
            else:
                raise FabricFault(f"core {self.core_id}: sync class {sync} is not allowed on the ring")
            progress = True
            link_free = False
            break
        while local:
            items = local[0][1]
            sync = (items[0] >> 30) & 3
            if sync == _LOCAL:
                # LOCAL_SYNC reached the head: everything ahead of it has left the core
                local.popleft()
                if rightward:
                    self.acks_r += 1
                else:
                    self.acks_l += 1
                progress = True
                continue
            if not link_free or len(outbound) > cap - 2:
                break
            local.popleft()
            outbound.append((1, items))
            if sync == _DATA:
                moved = len(items)
            else:
                self.metrics.token_hops += 1
            progress = True
            link_free = False
        m = self.metrics
        if moved:
            if rightward:
                m.data_hops_right += moved
            else:
                m.data_hops_left += moved
        if len(outbound) > m.high_water:
            m.high_water = len(outbound)
        return progress

    def _count_token(self, rightward: bool):
        if rightward:
            self.tokens_r += 1
        else:
            self.tokens_l += 1

    def step(self) -> bool:
        """One arbitration round on both lanes; True if anything moved."""
        a = (self.in_r or self.loc_r) and self._lane(self.in_r, self.out_r, self.loc_r, True)
        b = (self.in_l or self.loc_l) and self._lane(self.in_l, self.out_l, self.loc_l, False)
        return bool(a or b)

    def token_item(self) -> tuple:
        return (0, (encode(SynapsePacket.token(SyncClass.GLOBAL_SYNC, self.core_id)),))

    def local_sync_item(self) -> tuple:
        return (0, (encode(SynapsePacket.token(SyncClass.LOCAL_SYNC, self.core_id)),))


def build_ring(topo: TopologyConfig, capacity: int = DEFAULT_QUEUE_CAPACITY,
               local_capacity: int = DEFAULT_QUEUE_CAPACITY):
    """Channels and routers for a closed bidirectional ring."""
    n = topo.n_cores
    right = [Channel(capacity, f"{i}->{(i + 1) % n}") for i in range(n)]
    left = [Channel(capacity, f"{i}->{(i - 1) % n}") for i in range(n)]
    routers = [Router(i, topo, in_r=right[(i - 1) % n], out_r=right[i],
                      in_l=left[(i + 1) % n], out_l=left[i], local_capacity=local_capacity)
               for i in range(n)]
    return routers, right, left


def make_bursts(items, width: int = BURST_SIZE) -> list[tuple]:
    """Group consecutive packets into fresh (zero-hop) bursts."""
    items = list(items)
    return [(0, tuple(items[i:i + width])) for i in range(0, len(items), width)]


def split_item(items) -> tuple[np.ndarray, np.ndarray]:
    """Split fabric packets into (wire word, store position) arrays."""
    words = np.fromiter((x & WORD_MASK for x in items), dtype=np.uint64, count=len(items))
    tags = np.fromiter((x >> TAG_SHIFT for x in items), dtype=np.int64, count=len(items))
    return words, tags
