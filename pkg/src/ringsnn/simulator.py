"""Per-timestep orchestration of the ring of cores.

Each step runs, per core: release the accumulator slot, update neurons,
fetch and dispatch the synapse lists of this step's spikes, then route until
every core has seen every core's end-of-step token on both ring directions.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .fabric import (DEFAULT_QUEUE_CAPACITY, DeadlockError, DelayAccumulator, FabricFault,
                     TAG_SHIFT, TopologyConfig, build_ring)
from .network import Network, POISSON
from .packet import BURST_SIZE, decode_words
from .neuron import NeuronFault, NeuronState, Propagators, init_membrane_counter, lif_step, poisson_spikes
from .recording import RunMetrics, SpikeRecording
from .synapse_store import SynapseList

log = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 10**7
IDLE_WAIT = 1e-3


class ConfigError(ValueError):
    pass


def n_steps_for(t_bio_ms: float, dt: float) -> int:
    n = round(t_bio_ms / dt)
    if t_bio_ms < 0 or abs(n * dt - t_bio_ms) > 1e-9 * max(1.0, t_bio_ms):
        raise ConfigError(f"T_bio={t_bio_ms} ms is not a non-negative multiple of dt={dt} ms")
    return int(n)


class NeuronBlock:
    """Neuron state for the contiguous global ID range ``[lo, hi)``."""

    def __init__(self, net: Network, lo: int, hi: int, seed: int,
                 prop: Propagators | None = None, poisson: np.ndarray | None = None,
                 prob: np.ndarray | None = None):
        hi = min(hi, net.n_neurons)
        self.lo = lo
        self.n = max(hi - lo, 0)
        self.seed = seed
        ids = np.arange(lo, lo + self.n)
        poisson = net.is_poisson() if poisson is None else poisson
        is_poi = poisson[lo:lo + self.n]
        self.lif_local = np.flatnonzero(~is_poi)
        self.poi_local = np.flatnonzero(is_poi)
        self.lif_ids = ids[self.lif_local]
        self.poi_ids = ids[self.poi_local]
        prop = net.propagators() if prop is None else prop
        self.prop = prop.take(self.lif_ids)
        prob = net.spike_prob() if prob is None else prob
        self.prob = prob[self.poi_ids]
        v_lo, v_hi = net.v_init_bounds()
        v0 = init_membrane_counter(seed, self.lif_ids, v_lo[self.lif_ids], v_hi[self.lif_ids])
        k = len(self.lif_ids)
        self.state = NeuronState(v0, np.zeros(k), np.zeros(k, dtype=np.int64))

    def step(self, w_in: np.ndarray, t: int) -> np.ndarray:
        """Update all neurons for step ``t``; return spiking global IDs, ascending."""
        try:
            lif = lif_step(self.state, self.prop, w_in[self.lif_local])
        except NeuronFault as e:
            raise NeuronFault(int(self.lif_ids[e.index]), "non-finite state or input") from None
        spiked = np.zeros(self.n, dtype=bool)
        spiked[self.lif_local] = lif
        if len(self.poi_ids):
            spiked[self.poi_local] = poisson_spikes(self.prob, self.seed, self.poi_ids, t)
        return self.lo + np.flatnonzero(spiked)


@dataclass(frozen=True)
class StoreFields:
    """Decoded per-entry columns of a synapse store, looked up by store position."""

    dst: np.ndarray
    delay: np.ndarray
    weight: np.ndarray
    rank: np.ndarray  # position in canonical (source, edge) order

    @classmethod
    def from_store(cls, store: SynapseList) -> "StoreFields":
        weight, _, dst, delay = decode_words(store.words)
        rank = np.empty(len(store), dtype=np.int64)
        rank[np.lexsort((store.edge_id, store.src))] = np.arange(len(store))
        return cls(dst.astype(np.int64), delay.astype(np.int64), weight.astype(np.float64), rank)


class Core:
    """Fused neuron unit, fetch stage, router and accumulator of one core."""

    def __init__(self, core_id, block: NeuronBlock, router, tables, fields: "StoreFields",
                 canonical: bool):
        self.core_id = core_id
        self.block = block
        self.router = router
        self.acc = DelayAccumulator(block.n, base=block.lo)
        self.tables = tables
        self.fields = fields
        self.canonical = canonical
        self._token = router.token_item()
        self._lsync = router.local_sync_item()
        self.t = -1
        self.spikes = np.zeros(0, dtype=np.int64)
        self.delivered_total = 0

    def begin_step(self, t: int) -> None:
        self.t = t
        w_in = self.acc.release(t)
        self.spikes = self.block.step(w_in, t)
        self._queue = self.spikes.tolist()
        self._next = 0
        self._cur_r = self._cur_l = None
        self._pos_r = self._pos_l = 0
        self._awaiting_sync = False
        self._token_sent = False
        self.router.reset_step()

    def _push(self, lane, items, pos) -> int:
        free = self.router.local_capacity - len(lane)
        if free <= 0 or pos >= len(items):
            return pos
        chunk = items[pos:pos + free]
        lane.extend(chunk)
        return pos + len(chunk)

    def fetch_tick(self) -> bool:
        r = self.router
        if self._awaiting_sync:
            if r.lists_acked < 1:
                return False
            r.reset_acks()
            r.metrics.local_syncs += 1
            self._awaiting_sync = False
        if self._cur_r is not None:
            pr, pl = self._pos_r, self._pos_l
            self._pos_r = self._push(r.loc_r, self._cur_r, pr)
            self._pos_l = self._push(r.loc_l, self._cur_l, pl)
            moved = self._pos_r != pr or self._pos_l != pl
            if self._pos_r == len(self._cur_r) and self._pos_l == len(self._cur_l):
                if len(r.loc_r) < r.local_capacity and len(r.loc_l) < r.local_capacity:
                    r.loc_r.append(self._lsync)
                    r.loc_l.append(self._lsync)
                    self._cur_r = self._cur_l = None
                    self._awaiting_sync = True
                    return True
            return moved
        if self._next < len(self._queue):
            src = self._queue[self._next]
            self._next += 1
            local, self._cur_r, self._cur_l = self.tables[src]
            if local:
                r.delivered.append((0, local))
                r.metrics.delivered_local += len(local)
            self._pos_r = self._pos_l = 0
            self.fetch_tick()
            return True
        if not self._token_sent:
            r.loc_r.append(self._token)
            r.loc_l.append(self._token)
            self._token_sent = True
            return True
        return False

    def micro_step(self) -> bool:
        a = not self._token_sent and self.fetch_tick()
        b = self.router.step()
        return a or b

    @property
    def done(self) -> bool:
        return self._token_sent and self.router.barrier_done

    def end_step(self) -> None:
        bursts = self.router.delivered
        if not bursts:
            return
        self.router.delivered = []
        m = self.router.metrics
        remote = [b for b in bursts if b[0]]
        if remote:
            m.delivered_remote += sum(len(b[1]) for b in remote)
            m.max_hops = max(m.max_hops, max(b[0] for b in remote))
        tags = np.fromiter((x >> TAG_SHIFT for b in bursts for x in b[1]), dtype=np.int64)
        f = self.fields
        if self.canonical:
            tags = tags[np.argsort(f.rank[tags])]
        self.delivered_total += self.acc.accumulate_fields(f.dst[tags], f.delay[tags], f.weight[tags], self.t)

    def diagnostics(self) -> dict:
        r = self.router
        return {
            "core": self.core_id, "step": self.t,
            "in_r": len(r.in_r), "out_r": len(r.out_r), "in_l": len(r.in_l), "out_l": len(r.out_l),
            "loc_r": len(r.loc_r), "loc_l": len(r.loc_l),
            "tokens_r": r.tokens_r, "tokens_l": r.tokens_l,
            "spikes_left": len(self._queue) - self._next, "token_sent": self._token_sent,
        }


class RingSimulator:
    """Ring-of-cores simulator.

    ``workers=0`` selects the single-threaded deterministic scheduler (fixed
    round-robin over cores); ``workers>=1`` runs cores on that many threads
    that talk only through the ring channels. With ``canonical=True`` each
    step's deliveries are summed in (source, edge) order so the result does
    not depend on arrival order.
    """

    def __init__(self, net: Network, topo: TopologyConfig | None = None, seed: int = 0,
                 canonical: bool = True, workers: int = 0,
                 queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
                 step_budget: int = DEFAULT_STEP_BUDGET, link_width: int = BURST_SIZE):
        if link_width < 1:
            raise ValueError("link_width must be >= 1")
        topo = topo or TopologyConfig(net.n_cores, net.core_capacity, dt=net.dt)
        if topo.total_capacity < net.n_neurons:
            raise ConfigError(f"{topo.n_cores} cores x {topo.core_capacity} < {net.n_neurons} neurons")
        self.net = net
        self.topo = topo
        self.seed = seed
        self.canonical = canonical
        self.workers = workers
        self.step_budget = step_budget
        self.store = SynapseList.from_network(net, topo)
        self.fanout = np.diff(self.store.offsets)
        fields = StoreFields.from_store(self.store)
        tables = self.store.dispatch_tables(range(net.n_neurons), link_width)
        self.routers, self.right, self.left = build_ring(topo, queue_capacity, queue_capacity)
        prop, poisson, prob = net.propagators(), net.is_poisson(), net.spike_prob()
        self.cores = []
        for i, r in enumerate(self.routers):
            lo, hi = topo.core_range(i)
            block = NeuronBlock(net, lo, hi, seed, prop, poisson, prob)
            self.cores.append(Core(i, block, r, tables, fields, canonical))
        self.completed = np.zeros(topo.n_cores, dtype=np.int64)
        self.max_skew = 0
        self.micro_steps = 0
        self._fault: BaseException | None = None
        self._lock = threading.Lock()
        self._wake = threading.Condition()
        self._idle = 0

    # barrier bookkeeping

    def _complete(self, core: Core) -> None:
        core.end_step()
        with self._lock:
            self.completed[core.core_id] = core.t + 1
            skew = int(self.completed.max() - self.completed.min())
            self.max_skew = max(self.max_skew, skew)
        if skew > 1:
            raise FabricFault(f"barrier violated: step counters differ by {skew}")

    def _deadlock(self, t: int, why: str) -> DeadlockError:
        diag = {"step": t, "cores": [c.diagnostics() for c in self.cores]}
        return DeadlockError(f"step {t}: {why}", diag)

    def _route(self, group: list[Core], t: int, concurrent: bool) -> None:
        for c in group:
            c.begin_step(t)
        active = list(group)
        micro = 0
        while active:
            progress = False
            finished = False
            for c in active:
                # inlined micro_step: fetch, then one arbitration round
                r = c.router
                a = not c._token_sent and c.fetch_tick()
                if r.step() or a:
                    progress = True
                    if c._token_sent and r.tokens_r == r.n_cores and r.tokens_l == r.n_cores:
                        finished = True
            micro += 1
            if finished:
                for c in active:
                    if c.done:
                        self._complete(c)
                active = [c for c in active if not c.done]
            if micro > self.step_budget:
                raise self._deadlock(t, f"barrier not reached within {self.step_budget} micro-steps")
            if not progress:
                if not concurrent:
                    raise self._deadlock(t, "no router or fetch stage can make progress")
                if self._fault is not None:
                    return
                # park until another worker moves something (timeout covers a missed wake-up)
                with self._wake:
                    self._idle += 1
                    self._wake.wait(IDLE_WAIT)
                    self._idle -= 1
            elif concurrent and self._idle:
                with self._wake:
                    self._wake.notify_all()
        with self._lock:
            self.micro_steps += micro

    def _check_drained(self, t: int) -> None:
        if any(self.right) or any(self.left):
            raise self._deadlock(t, "packets left on the ring after the barrier")

    def _step_deterministic(self, t: int) -> None:
        self._route(self.cores, t, concurrent=False)
        self._check_drained(t)

    def _start_workers(self):
        w = min(self.workers, len(self.cores))
        groups = [self.cores[k::w] for k in range(w)]
        self._start = threading.Barrier(w + 1)
        self._end = threading.Barrier(w + 1)
        self._stop = False
        self._t = 0

        def worker(group):
            while True:
                try:
                    self._start.wait()
                    if self._stop:
                        return
                    try:
                        self._route(group, self._t, concurrent=True)
                    except BaseException as e:  # surfaced by the coordinator
                        self._fault = self._fault or e
                        self._start.abort()
                        self._end.abort()
                        return
                    self._end.wait()
                except threading.BrokenBarrierError:
                    return

        self._threads = [threading.Thread(target=worker, args=(g,), daemon=True) for g in groups]
        for th in self._threads:
            th.start()

    def _stop_workers(self):
        self._stop = True
        try:
            self._start.wait(timeout=5)
        except threading.BrokenBarrierError:
            pass
        for th in self._threads:
            th.join(timeout=5)

    def _step_concurrent(self, t: int) -> None:
        self._t = t
        try:
            self._start.wait()
            self._end.wait()
        except threading.BrokenBarrierError:
            raise self._fault or FabricFault("worker barrier broken") from None
        self._check_drained(t)

    def run(self, t_bio_ms: float | None = None, n_steps: int | None = None) -> tuple[SpikeRecording, RunMetrics]:
        if n_steps is None:
            n_steps = n_steps_for(t_bio_ms or 0.0, self.net.dt)
        steps, neurons = [], []
        concurrent = self.workers > 0
        if concurrent and n_steps:
            self._start_workers()
        try:
            for t in range(n_steps):
                if concurrent:
                    self._step_concurrent(t)
                else:
                    self._step_deterministic(t)
                spk = [c.spikes for c in self.cores if len(c.spikes)]
                if spk:
                    spk = np.concatenate(spk)
                    steps.append(np.full(len(spk), t, dtype=np.int64))
                    neurons.append(spk)
        finally:
            if concurrent and n_steps:
                self._stop_workers()
        rec = SpikeRecording.from_chunks(steps, neurons, self._meta(n_steps))
        return rec, self._metrics(rec, n_steps)

    def _meta(self, n_steps: int) -> dict:
        return {
            "seed": self.seed, "network": self.net.digest(), "n_neurons": self.net.n_neurons,
            "dt": self.net.dt, "total_steps": n_steps, "mode": "ring",
            "canonical": int(self.canonical), "workers": self.workers,
            "cores": self.topo.n_cores, "capacity": self.topo.core_capacity,
        }

    def _metrics(self, rec: SpikeRecording, n_steps: int) -> RunMetrics:
        ms = [r.metrics for r in self.routers]
        right = [m.data_hops_right for m in ms]
        left = [m.data_hops_left for m in ms]
        n = self.topo.n_cores
        # right link i joins core i and i+1; left link i joins core i and i-1
        crossings = sum(right[b] for b in self.topo.device_boundaries) + \
            sum(left[(b + 1) % n] for b in self.topo.device_boundaries)
        m = RunMetrics(
            total_spikes=len(rec),
            synaptic_events=sum(c.delivered_total for c in self.cores),
            expected_synaptic_events=int(self.fanout[rec.neurons].sum()) if len(rec) else 0,
            ring_hops=sum(right) + sum(left),
            token_hops=sum(x.token_hops for x in ms),
            link_traffic_right=right,
            link_traffic_left=left,
            inter_device_crossings=crossings,
            max_queue_occupancy=max(x.high_water for x in ms),
            max_packet_hops=max(x.max_hops for x in ms),
            stalls=sum(x.stalls for x in ms),
            local_syncs=sum(x.local_syncs for x in ms),
            micro_steps=self.micro_steps,
            max_step_skew=self.max_skew,
            steps=n_steps,
            weight_injected=sum(c.acc.injected for c in self.cores),
            weight_released=sum(c.acc.released_total for c in self.cores),
        )
        if m.synaptic_events != m.expected_synaptic_events:
            raise FabricFault(f"delivered {m.synaptic_events} synaptic events, "
                              f"expected {m.expected_synaptic_events}")
        return m


def run(net: Network, t_bio_ms: float, seed: int = 0, topo: TopologyConfig | None = None,
        **kw) -> tuple[SpikeRecording, RunMetrics]:
    return RingSimulator(net, topo, seed=seed, **kw).run(t_bio_ms)
