"""Sequential reference simulator: no ring, no packets, one dense delay matrix."""
from __future__ import annotations

import numpy as np

from .network import MAX_DELAY, Network, NetworkError
from .recording import SpikeRecording
from .simulator import NeuronBlock, n_steps_for


def oracle_run(net: Network, t_bio_ms: float | None = None, seed: int = 0,
               n_steps: int | None = None) -> SpikeRecording:
    """Reference run over the same network and seed as the ring simulator.

    Inputs wait in a (neuron x 64) matrix. Within a step, contributions are
    added spike by spike in ascending source order and, per source, in input
    edge order; this is the canonical order the ring reproduces.
    """
    if n_steps is None:
        n_steps = n_steps_for(t_bio_ms or 0.0, net.dt)
    net.check_edges()
    n = net.n_neurons
    block = NeuronBlock(net, 0, n, seed)
    order, offsets = net.csr_by_src()
    e_dst = net.dst[order].astype(np.int64)
    e_delay = net.delay[order].astype(np.int64)
    e_w = net.weight[order].astype(np.float64)
    if np.any((e_delay < 1) | (e_delay > MAX_DELAY)):
        raise NetworkError("delay outside [1, 64]")
    pending = np.zeros((n, MAX_DELAY), dtype=np.float64)
    flat = pending.reshape(-1)
    steps, neurons = [], []
    for t in range(n_steps):
        slot = t % MAX_DELAY
        w_in = pending[:, slot].copy()
        pending[:, slot] = 0.0
        spikes = block.step(w_in, t)
        if not len(spikes):
            continue
        steps.append(np.full(len(spikes), t, dtype=np.int64))
        neurons.append(spikes)
        starts = offsets[spikes]
        counts = offsets[spikes + 1] - starts
        total = int(counts.sum())
        if not total:
            continue
        # concatenated edge ranges of all spiking sources, in order
        idx = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(total)
        cell = e_dst[idx] * MAX_DELAY + (t + e_delay[idx]) % MAX_DELAY
        np.add.at(flat, cell, e_w[idx])
    meta = {"seed": seed, "network": net.digest(), "n_neurons": n, "dt": net.dt,
            "total_steps": n_steps, "mode": "oracle", "canonical": 1}
    return SpikeRecording.from_chunks(steps, neurons, meta)
