"""Spike recordings, run metrics, and their file formats."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class SpikeRecording:
    steps: np.ndarray
    neurons: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.neurons = np.asarray(self.neurons, dtype=np.int64)

    @classmethod
    def from_chunks(cls, steps: list, neurons: list, meta: dict) -> "SpikeRecording":
        if not neurons:
            return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), meta)
        return cls(np.concatenate(steps), np.concatenate(neurons), meta)

    def __len__(self) -> int:
        return len(self.steps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeRecording):
            return NotImplemented
        return np.array_equal(self.steps, other.steps) and np.array_equal(self.neurons, other.neurons)

    @property
    def dt(self) -> float:
        return float(self.meta.get("dt", 0.1))

    @property
    def total_steps(self) -> int:
        return int(self.meta.get("total_steps", int(self.steps.max()) + 1 if len(self) else 0))

    @property
    def duration_ms(self) -> float:
        return self.total_steps * self.dt

    def times_ms(self) -> np.ndarray:
        return self.steps * self.dt

    def window(self, start_step: int, stop_step: int) -> "SpikeRecording":
        keep = (self.steps >= start_step) & (self.steps < stop_step)
        return SpikeRecording(self.steps[keep], self.neurons[keep], dict(self.meta))

    def counts(self, n_neurons: int) -> np.ndarray:
        return np.bincount(self.neurons, minlength=n_neurons)

    def trains(self, neurons) -> dict[int, np.ndarray]:
        """Spike steps per neuron, for the requested neurons."""
        neurons = np.asarray(neurons)
        order = np.argsort(self.neurons, kind="stable")
        sn = self.neurons[order]
        st = self.steps[order]
        lo = np.searchsorted(sn, neurons, "left")
        hi = np.searchsorted(sn, neurons, "right")
        return {int(n): st[a:b] for n, a, b in zip(neurons, lo, hi)}

    # file formats

    def write_text(self, path) -> None:
        lines = [f"{s}\t{n}\n" for s, n in zip(self.steps.tolist(), self.neurons.tolist())]
        Path(path).write_text("".join(lines))

    def write_binary(self, path) -> None:
        pairs = np.empty((len(self), 2), dtype="<u4")
        pairs[:, 0] = self.steps
        pairs[:, 1] = self.neurons
        Path(path).write_bytes(pairs.tobytes())

    def write_meta(self, path, extra: dict | None = None) -> None:
        write_kv(path, {**self.meta, **(extra or {})})

    def save(self, directory, stem: str = "spikes", extra_meta: dict | None = None) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"text": d / f"{stem}.txt", "binary": d / f"{stem}.bin", "meta": d / f"{stem}.meta"}
        self.write_text(paths["text"])
        self.write_binary(paths["binary"])
        self.write_meta(paths["meta"], extra_meta)
        return paths

    @classmethod
    def read_text(cls, path, meta_path=None) -> "SpikeRecording":
        path = Path(path)
        raw = path.read_text().split()
        arr = np.array(raw, dtype=np.int64).reshape(-1, 2) if raw else np.zeros((0, 2), np.int64)
        return cls(arr[:, 0], arr[:, 1], _load_meta(path, meta_path))

    @classmethod
    def read_binary(cls, path, meta_path=None) -> "SpikeRecording":
        path = Path(path)
        pairs = np.frombuffer(path.read_bytes(), dtype="<u4").reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1], _load_meta(path, meta_path))

    @classmethod
    def read(cls, path, meta_path=None) -> "SpikeRecording":
        path = Path(path)
        if path.is_dir():
            path = path / "spikes.bin"
        reader = cls.read_binary if path.suffix == ".bin" else cls.read_text
        return reader(path, meta_path)


def _load_meta(path: Path, meta_path) -> dict:
    meta_path = Path(meta_path) if meta_path else path.with_suffix(".meta")
    return read_kv(meta_path) if meta_path.exists() else {}


def _parse_value(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def write_kv(path, data: dict) -> None:
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in data.items()))


def read_kv(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = _parse_value(v.strip())
    return out


@dataclass
class RunMetrics:
    total_spikes: int = 0
    synaptic_events: int = 0
    expected_synaptic_events: int = 0
    ring_hops: int = 0
    token_hops: int = 0
    link_traffic_right: list = field(default_factory=list)
    link_traffic_left: list = field(default_factory=list)
    inter_device_crossings: int = 0
    max_queue_occupancy: int = 0
    max_packet_hops: int = 0
    stalls: int = 0
    local_syncs: int = 0
    micro_steps: int = 0
    max_step_skew: int = 0
    steps: int = 0
    weight_injected: float = 0.0
    weight_released: float = 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["link_traffic_right"] = ",".join(map(str, self.link_traffic_right))
        d["link_traffic_left"] = ",".join(map(str, self.link_traffic_left))
        return d
