"""Spike-train statistics (rate, CV of ISI, pairwise Pearson r) and
recording-vs-recording comparison."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .recording import SpikeRecording, write_kv

DEFAULT_BIN_MS = 2.0
DEFAULT_PAIRS = 1000


class StatsError(ValueError):
    pass


def firing_rate(rec: SpikeRecording, neurons, t_ms: float) -> np.ndarray:
    """Spikes per second for each neuron over a run of ``t_ms``."""
    if t_ms <= 0:
        raise StatsError("duration must be positive")
    neurons = np.asarray(neurons, dtype=np.int64)
    if not len(neurons):
        return np.zeros(0)
    counts = np.bincount(rec.neurons, minlength=int(neurons.max()) + 1)
    return counts[neurons] * 1000.0 / t_ms


def cv_isi(rec: SpikeRecording, neuron: int) -> float:
    """sd/mean of inter-spike intervals; NaN when fewer than 3 spikes."""
    train = np.sort(rec.steps[rec.neurons == neuron])
    return _cv(train)


def _cv(train: np.ndarray) -> float:
    if len(train) < 3:
        return math.nan
    isi = np.diff(train).astype(np.float64)
    return float(isi.std() / isi.mean())


def cv_isi_many(rec: SpikeRecording, neurons) -> np.ndarray:
    trains = rec.trains(neurons)
    return np.array([_cv(np.sort(trains[int(n)])) for n in neurons], dtype=np.float64)


def binned(rec: SpikeRecording, neurons, bin_ms: float, total_steps: int | None = None) -> np.ndarray:
    """Spike counts, shape (len(neurons), n_bins)."""
    dt = rec.dt
    per_bin = bin_ms / dt
    if bin_ms <= 0 or abs(per_bin - round(per_bin)) > 1e-9:
        raise StatsError(f"bin {bin_ms} ms is not a multiple of dt={dt} ms")
    per_bin = int(round(per_bin))
    total = rec.total_steps if total_steps is None else total_steps
    n_bins = total // per_bin
    neurons = np.asarray(neurons, dtype=np.int64)
    row = np.full(int(max(neurons.max(initial=-1), rec.neurons.max(initial=-1))) + 1, -1, dtype=np.int64)
    row[neurons] = np.arange(len(neurons))
    r = row[rec.neurons] if len(rec) else np.zeros(0, np.int64)
    b = rec.steps // per_bin
    keep = (r >= 0) & (b < n_bins)
    out = np.zeros((len(neurons), n_bins), dtype=np.float64)
    np.add.at(out, (r[keep], b[keep]), 1.0)
    return out


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    den = math.sqrt(float(x @ x) * float(y @ y))
    if den == 0.0:
        return math.nan
    return float(np.clip((x @ y) / den, -1.0, 1.0))


@dataclass
class PearsonResult:
    r: np.ndarray
    skipped: int
    pairs: np.ndarray


def sample_pairs(neurons, n_pairs: int, seed: int) -> np.ndarray:
    neurons = np.asarray(neurons, dtype=np.int64)
    if len(neurons) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, len(neurons), n_pairs)
    b = rng.integers(0, len(neurons) - 1, n_pairs)
    b = b + (b >= a)
    return np.stack([neurons[a], neurons[b]], axis=1)


def pearson_pairs(rec: SpikeRecording, neurons, bin_ms: float = DEFAULT_BIN_MS,
                  n_pairs: int = DEFAULT_PAIRS, seed: int = 0,
                  total_steps: int | None = None) -> PearsonResult:
    """Pearson r of binned counts over randomly sampled pairs of distinct
    neurons. Pairs with a zero-variance train are skipped and counted."""
    pairs = sample_pairs(neurons, n_pairs, seed)
    if not len(pairs):
        return PearsonResult(np.zeros(0), 0, pairs)
    uniq, inv = np.unique(pairs, return_inverse=True)
    inv = inv.reshape(-1, 2)
    counts = binned(rec, uniq, bin_ms, total_steps)
    centered = counts - counts.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))
    num = (centered[inv[:, 0]] * centered[inv[:, 1]]).sum(axis=1)
    den = norms[inv[:, 0]] * norms[inv[:, 1]]
    ok = den > 0
    r = np.clip(num[ok] / den[ok], -1.0, 1.0)
    return PearsonResult(r, int((~ok).sum()), pairs)


@dataclass
class PopulationStats:
    name: str
    rates_a: np.ndarray
    rates_b: np.ndarray
    cv_a: np.ndarray
    cv_b: np.ndarray
    r_a: np.ndarray
    r_b: np.ndarray
    skipped_a: int = 0
    skipped_b: int = 0

    @staticmethod
    def _median(x):
        x = x[~np.isnan(x)]
        return float(np.median(x)) if len(x) else math.nan

    @property
    def rate_median_a(self) -> float:
        return self._median(self.rates_a)

    @property
    def rate_median_b(self) -> float:
        return self._median(self.rates_b)

    @property
    def rate_rel_diff(self) -> float:
        a, b = self.rate_median_a, self.rate_median_b
        if a == b:
            return 0.0
        return abs(a - b) / b if b else math.inf

    @property
    def cv_median_diff(self) -> float:
        a, b = self._median(self.cv_a), self._median(self.cv_b)
        if math.isnan(a) and math.isnan(b):
            return 0.0
        return abs(a - b)

    @property
    def pearson_mean_diff(self) -> float:
        a = float(self.r_a.mean()) if len(self.r_a) else 0.0
        b = float(self.r_b.mean()) if len(self.r_b) else 0.0
        return abs(a - b)


@dataclass
class StatsReport:
    populations: list[PopulationStats]
    exact_match: bool
    bin_ms: float = DEFAULT_BIN_MS
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"exact_match": int(self.exact_match), "bin_ms": self.bin_ms}
        for p in self.populations:
            out[f"{p.name}.rate_median_a"] = p.rate_median_a
            out[f"{p.name}.rate_median_b"] = p.rate_median_b
            out[f"{p.name}.rate_rel_diff"] = p.rate_rel_diff
            out[f"{p.name}.cv_median_diff"] = p.cv_median_diff
            out[f"{p.name}.pearson_mean_diff"] = p.pearson_mean_diff
            out[f"{p.name}.pearson_skipped_a"] = p.skipped_a
            out[f"{p.name}.pearson_skipped_b"] = p.skipped_b
        return out

    def to_text(self) -> str:
        lines = [f"exact match: {'yes' if self.exact_match else 'no'}",
                 f"{'population':<12}{'rate A':>10}{'rate B':>10}{'rel.diff':>10}"
                 f"{'CV diff':>10}{'r diff':>10}"]
        for p in self.populations:
            lines.append(f"{p.name:<12}{p.rate_median_a:>10.3f}{p.rate_median_b:>10.3f}"
                         f"{p.rate_rel_diff:>10.4f}{p.cv_median_diff:>10.4f}{p.pearson_mean_diff:>10.4f}")
        return "\n".join(lines) + "\n"

    def write(self, directory) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"text": d / "report.txt", "kv": d / "report.kv", "rates": d / "rates.csv",
                 "cv": d / "cv.csv", "pearson": d / "pearson.csv"}
        paths["text"].write_text(self.to_text())
        write_kv(paths["kv"], self.summary())
        for key, a, b in (("rates", "rates_a", "rates_b"), ("cv", "cv_a", "cv_b"),
                          ("pearson", "r_a", "r_b")):
            with open(paths[key], "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["population", "recording", "value"])
                for p in self.populations:
                    for tag, arr in (("A", getattr(p, a)), ("B", getattr(p, b))):
                        w.writerows((p.name, tag, repr(float(v))) for v in arr)
        return paths


def compare(rec_a: SpikeRecording, rec_b: SpikeRecording, populations: list[tuple[str, np.ndarray]],
            bin_ms: float = DEFAULT_BIN_MS, n_pairs: int = DEFAULT_PAIRS, seed: int = 0) -> StatsReport:
    """Per-population statistics of two recordings of the same network."""
    for key in ("network", "n_neurons", "dt"):
        if key in rec_a.meta and key in rec_b.meta and rec_a.meta[key] != rec_b.meta[key]:
            raise StatsError(f"recordings disagree on {key}: {rec_a.meta[key]} vs {rec_b.meta[key]}")
    if rec_a.total_steps != rec_b.total_steps:
        raise StatsError(f"recordings cover {rec_a.total_steps} and {rec_b.total_steps} steps")
    total = rec_a.total_steps
    t_ms = total * rec_a.dt
    out = []
    for k, (name, ids) in enumerate(populations):
        ids = np.asarray(ids, dtype=np.int64)
        pa = pearson_pairs(rec_a, ids, bin_ms, n_pairs, seed + k, total)
        pb = pearson_pairs(rec_b, ids, bin_ms, n_pairs, seed + k, total)
        out.append(PopulationStats(
            name,
            firing_rate(rec_a, ids, t_ms) if t_ms > 0 else np.zeros(len(ids)),
            firing_rate(rec_b, ids, t_ms) if t_ms > 0 else np.zeros(len(ids)),
            cv_isi_many(rec_a, ids), cv_isi_many(rec_b, ids),
            pa.r, pb.r, pa.skipped, pb.skipped))
    return StatsReport(out, rec_a == rec_b, bin_ms, {"total_steps": total})


def network_groups(net) -> list[tuple[str, np.ndarray]]:
    return [(p.name, p.ids) for p in net.populations if p.size]
