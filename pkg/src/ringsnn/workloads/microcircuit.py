"""Layered cortical microcircuit generator (8 populations, DC drive).

Connection counts follow the fixed-total-number rule: for a population pair
with connection probability ``p``, ``K = log(1 - p) / log(1 - 1/(N_pre N_post))``
synapses are placed between uniformly drawn source and target neurons
(multapses allowed). Generation is streamed pair by pair, so fanout
statistics of the full-size model never need the whole edge list in memory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np

from ..network import LIF, MAX_DELAY, Network, NetworkError, Population
from ..neuron import LifParams

CHUNK = 4_000_000


@dataclass
class PopulationSpec:
    name: str
    size: int
    params: LifParams
    i_dc: float
    v_init: tuple[float, float]


def load_config(path=None) -> dict:
    if path is None:
        text = resources.files("ringsnn.workloads").joinpath("data/microcircuit.json").read_text()
    else:
        text = Path(path).read_text()
    cfg = json.loads(text)
    probs = np.asarray(cfg["conn_probs"], dtype=float)
    n = len(cfg["populations"])
    if probs.shape != (n, n) or np.any((probs < 0) | (probs > 1)):
        raise NetworkError("conn_probs must be an n x n matrix of probabilities")
    if len(cfg["full_sizes"]) != n or min(cfg["full_sizes"]) < 0:
        raise NetworkError("full_sizes must list one non-negative size per population")
    return cfg


def scaled_sizes(full_sizes, scale: float) -> np.ndarray:
    """Per-population sizes, rounded half to even."""
    if not 0 < scale <= 1:
        raise NetworkError(f"scale must be in (0, 1], got {scale}")
    return np.round(np.asarray(full_sizes, dtype=float) * scale).astype(np.int64)


def synapse_counts(sizes, probs) -> np.ndarray:
    """Total synapses per (target, source) population pair."""
    sizes = np.asarray(sizes, dtype=float)
    probs = np.asarray(probs, dtype=float)
    pairs = np.outer(sizes, sizes)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log1p(-probs) / np.log1p(-1.0 / pairs)
    k = np.where((probs > 0) & (pairs > 0), k, 0.0)
    return np.round(k).astype(np.int64)


def population_specs(cfg: dict, scale: float) -> list[PopulationSpec]:
    sizes = scaled_sizes(cfg["full_sizes"], scale)
    empty = [name for name, s in zip(cfg["populations"], sizes) if s == 0]
    if empty:
        raise NetworkError(f"scale {scale} empties populations: {', '.join(empty)}")
    nr = cfg["neuron"]
    tau_syn = nr["tau_syn"]
    specs = []
    for name, size, k_ext in zip(cfg["populations"], sizes, cfg["k_ext"]):
        i_dc = k_ext * cfg["bg_rate_hz"] * cfg["psc_mean_pa"] * tau_syn * 1e-3
        params = LifParams.from_capacitance(nr["c_m"], nr["tau_m"], tau_syn=tau_syn, e_l=nr["e_l"],
                                            v_th=nr["v_th"], v_reset=nr["v_reset"], i_dc=i_dc,
                                            t_ref=nr["t_ref"], dt=cfg["dt"])
        specs.append(PopulationSpec(name, int(size), params, i_dc, tuple(cfg["v_init"])))
    return specs


def _pair_params(cfg: dict, tgt: int, src: int) -> tuple[float, float, float]:
    """(weight mean, weight sd, delay mean) for one projection."""
    excitatory = cfg["populations"][src].endswith("E")
    w = cfg["psc_mean_pa"] * (1.0 if excitatory else cfg["g"])
    if cfg["populations"][src] == "L4E" and cfg["populations"][tgt] == "L23E":
        w *= cfg["l4e_to_l23e_factor"]
    d = cfg["delay_exc_ms"] if excitatory else cfg["delay_inh_ms"]
    return w, abs(w) * cfg["psc_rel_sd"], d


def iter_edges(cfg: dict, scale: float, seed: int = 0,
               chunk: int = CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (src, dst, weight, delay_steps) chunks, source population major."""
    specs = population_specs(cfg, scale)
    sizes = np.array([s.size for s in specs])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    counts = synapse_counts(sizes, cfg["conn_probs"])
    dt = cfg["dt"]
    n = len(specs)
    for j in range(n):
        for i in range(n):
            k = int(counts[i, j])
            if not k:
                continue
            rng = np.random.default_rng([seed, j, i])
            w_mean, w_sd, d_mean = _pair_params(cfg, i, j)
            for a in range(0, k, chunk):
                m = min(chunk, k - a)
                src = starts[j] + rng.integers(0, sizes[j], m)
                dst = starts[i] + rng.integers(0, sizes[i], m)
                w = rng.normal(w_mean, w_sd, m)
                w = np.maximum(w, 0.0) if w_mean > 0 else np.minimum(w, 0.0)
                d = rng.normal(d_mean, d_mean * cfg["delay_rel_sd"], m)
                steps = np.clip(np.round(d / dt), 1, MAX_DELAY).astype(np.uint8)
                yield src.astype(np.uint32), dst.astype(np.uint32), w.astype(np.float32), steps


def gen_microcircuit(cfg: dict | None = None, scale: float = 1.0, seed: int = 0,
                     core_capacity: int = 4096) -> Network:
    cfg = cfg or load_config()
    specs = population_specs(cfg, scale)
    pops, start = [], 0
    for s in specs:
        pops.append(Population(s.name, start, s.size, LIF, s.params, 0.0, s.v_init))
        start += s.size
    parts = list(iter_edges(cfg, scale, seed))
    if parts:
        src, dst, w, d = (np.concatenate(x) for x in zip(*parts))
    else:
        src = dst = np.zeros(0, np.uint32)
        w, d = np.zeros(0, np.float32), np.zeros(0, np.uint8)
    return Network(pops, src, dst, w, d, dt=cfg["dt"], core_capacity=core_capacity,
                   n_cores=-(-start // core_capacity))


def fanout_stats(cfg: dict | None = None, scale: float = 1.0, seed: int = 0) -> dict:
    """Generate the edge stream and summarize per-neuron fanout."""
    cfg = cfg or load_config()
    n = int(scaled_sizes(cfg["full_sizes"], scale).sum())
    fan = np.zeros(n, dtype=np.int64)
    n_edges = 0
    for src, _, _, _ in iter_edges(cfg, scale, seed):
        fan += np.bincount(src, minlength=n)
        n_edges += len(src)
    return {"neurons": n, "edges": n_edges, "mean_fanout": float(fan.mean()),
            "max_fanout": int(fan.max()), "min_fanout": int(fan.min())}
