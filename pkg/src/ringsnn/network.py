"""In-memory network model and the binary network file format.

File layout, all little-endian::

    header      magic "RSNNNET1", u16 version, u16 reserved, u32 n_neurons,
                u32 core_capacity, u32 n_cores, f64 dt, u32 n_populations,
                u64 n_edges
    population  32-byte name, u32 start, u32 size, u8 kind, 7 pad bytes,
                f64 x 11 (tau_m, tau_syn, e_l, v_th, v_reset, r_m, i_dc,
                t_ref, rate_hz, v_init_lo, v_init_hi)
    edge        u64 packet word, u32 source neuron ID
"""
from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .neuron import LifParams, Propagators, spike_probability
from .packet import DST_MASK, SyncClass, decode_words, encode_words

MAGIC = b"RSNNNET1"
VERSION = 1
MAX_DELAY = 64

_HEADER = struct.Struct("<8sHHIIIdIQ")
_POP = struct.Struct("<32sIIB7x11d")
EDGE_DTYPE = np.dtype([("word", "<u8"), ("src", "<u4")])

LIF = 0
POISSON = 1


class NetworkError(ValueError):
    pass


@dataclass
class Population:
    name: str
    start: int
    size: int
    kind: int = LIF
    params: LifParams = field(default_factory=LifParams)
    rate_hz: float = 0.0
    v_init: tuple[float, float] = (-65.0, -55.0)

    @property
    def stop(self) -> int:
        return self.start + self.size

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.start, self.stop)


@dataclass
class Network:
    populations: list[Population]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    delay: np.ndarray
    dt: float = 0.1
    core_capacity: int = 4096
    n_cores: int = 1

    def __post_init__(self):
        self.src = np.ascontiguousarray(self.src, dtype=np.uint32)
        self.dst = np.ascontiguousarray(self.dst, dtype=np.uint32)
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float32)
        self.delay = np.ascontiguousarray(self.delay, dtype=np.uint8)
        pos = 0
        for p in self.populations:
            if p.start != pos:
                raise NetworkError(f"population {p.name!r} starts at {p.start}, expected {pos}")
            if p.size < 0:
                raise NetworkError(f"population {p.name!r} has negative size")
            pos = p.stop
        if not (len(self.src) == len(self.dst) == len(self.weight) == len(self.delay)):
            raise NetworkError("edge arrays differ in length")
        if self.n_neurons > DST_MASK + 1:
            raise NetworkError("network exceeds the 22-bit neuron ID space")

    @property
    def n_neurons(self) -> int:
        return self.populations[-1].stop if self.populations else 0

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def population(self, name: str) -> Population:
        for p in self.populations:
            if p.name == name:
                return p
        raise KeyError(name)

    def check_edges(self) -> None:
        n = self.n_neurons
        for arr, what in ((self.src, "src"), (self.dst, "dst")):
            bad = np.flatnonzero(arr >= n)
            if bad.size:
                raise NetworkError(f"edge {bad[0]}: {what} {arr[bad[0]]} >= {n} neurons")
        bad = np.flatnonzero((self.delay < 1) | (self.delay > MAX_DELAY))
        if bad.size:
            raise NetworkError(f"edge {bad[0]}: delay {self.delay[bad[0]]} outside [1, {MAX_DELAY}]")

    # per-neuron views

    def pop_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.populations)), [p.size for p in self.populations])

    def per_neuron(self, fn) -> np.ndarray:
        return np.repeat(np.array([fn(p) for p in self.populations], dtype=np.float64),
                         [p.size for p in self.populations])

    def is_poisson(self) -> np.ndarray:
        return self.per_neuron(lambda p: p.kind == POISSON).astype(bool)

    def spike_prob(self) -> np.ndarray:
        return spike_probability(self.per_neuron(lambda p: p.rate_hz if p.kind == POISSON else 0.0), self.dt)

    def propagators(self) -> Propagators:
        params = []
        for p in self.populations:
            params.extend([p.params] * p.size)
        return Propagators.from_params(params) if params else Propagators.from_params([])

    def v_init_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.per_neuron(lambda p: p.v_init[0]), self.per_neuron(lambda p: p.v_init[1])

    def fanout(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_neurons)

    def csr_by_src(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge indices grouped by source (file order kept) and offsets."""
        order = np.argsort(self.src, kind="stable")
        offsets = np.zeros(self.n_neurons + 1, dtype=np.int64)
        np.cumsum(self.fanout(), out=offsets[1:])
        return order, offsets

    # serialization

    def edge_records(self) -> np.ndarray:
        rec = np.empty(self.n_edges, dtype=EDGE_DTYPE)
        rec["word"] = encode_words(self.weight, self.dst, self.delay, SyncClass.DATA)
        rec["src"] = self.src
        return rec

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]

    def write(self, out) -> None:
        if isinstance(out, (str, Path)):
            with open(out, "wb") as fh:
                self.write(fh)
            return
        out.write(_HEADER.pack(MAGIC, VERSION, 0, self.n_neurons, self.core_capacity,
                               self.n_cores, self.dt, len(self.populations), self.n_edges))
        for p in self.populations:
            q = p.params
            out.write(_POP.pack(p.name.encode()[:32], p.start, p.size, p.kind,
                                q.tau_m, q.tau_syn, q.e_l, q.v_th, q.v_reset, q.r_m, q.i_dc,
                                q.t_ref, p.rate_hz, p.v_init[0], p.v_init[1]))
        out.write(self.edge_records().tobytes())

    @classmethod
    def read(cls, source) -> "Network":
        if isinstance(source, (str, Path)):
            raw = Path(source).read_bytes()
        elif isinstance(source, (bytes, bytearray)):
            raw = bytes(source)
        else:
            raw = source.read()
        if len(raw) < _HEADER.size:
            raise NetworkError("truncated network file header")
        magic, version, _, n_neurons, cap, n_cores, dt, n_pops, n_edges = _HEADER.unpack_from(raw, 0)
        if magic != MAGIC:
            raise NetworkError(f"bad magic {magic!r}")
        if version != VERSION:
            raise NetworkError(f"unsupported version {version}")
        off = _HEADER.size
        pops = []
        for _ in range(n_pops):
            name, start, size, kind, *vals = _POP.unpack_from(raw, off)
            off += _POP.size
            params = LifParams(*vals[:8], dt=dt)
            pops.append(Population(name.rstrip(b"\0").decode(), start, size, kind,
                                   params, vals[8], (vals[9], vals[10])))
        need = off + n_edges * EDGE_DTYPE.itemsize
        if len(raw) != need:
            raise NetworkError(f"network file is {len(raw)} bytes, expected {need}")
        rec = np.frombuffer(raw, dtype=EDGE_DTYPE, count=n_edges, offset=off)
        weight, sync, dst, delay = decode_words(rec["word"])
        if np.any(sync != SyncClass.DATA):
            raise NetworkError("edge array contains non-DATA packets")
        net = cls(pops, rec["src"].copy(), dst, weight, delay, dt=dt, core_capacity=cap, n_cores=n_cores)
        if net.n_neurons != n_neurons:
            raise NetworkError(f"populations cover {net.n_neurons} neurons, header says {n_neurons}")
        return net
